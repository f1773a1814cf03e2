// umbra: material-consistent shadow edge extraction, shadow removal
// refinement, and ground-truth-free CDD evaluation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "umbra/harness.hpp"
#include "umbra/image_io.hpp"
#include "umbra/mc_edges.hpp"
#include "umbra/refine.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::array<double, 3> parse_triple(const std::string& text, const std::string& flag) {
    std::array<double, 3> out{};
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &out[0], &out[1], &out[2]) != 3) {
        throw CLI::ValidationError(flag, "expected three comma-separated values");
    }
    return out;
}

umbra::LossWeights parse_weights(const std::string& text) {
    umbra::LossWeights w;
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf", &w.distance, &w.distribution,
                    &w.texture, &w.nonshadow) != 4) {
        throw CLI::ValidationError("--weights", "expected four comma-separated values");
    }
    return w;
}

umbra::LabelMap load_labels_cli(const std::string& path, bool fallback, int height,
                                int width) {
    if (!path.empty()) {
        umbra::LabelMapLoad loaded = umbra::load_labelmap(path);
        if (loaded.overlap_count > 0) {
            std::cerr << "warning: " << loaded.overlap_count
                      << " overlapping pixels in segment masks (later id wins)\n";
        }
        return loaded.labels;
    }
    if (fallback) {
        return umbra::LabelMap(height, width, 1);
    }
    throw umbra::Error("no segmentation given; pass --segmentation or "
                       "--fallback-single-segment");
}

void draw_rect(umbra::RgbImage& img, umbra::Coord top_left, int size, const umbra::Rgb& color) {
    int r0 = top_left.row;
    int c0 = top_left.col;
    for (int c = c0; c < c0 + size; ++c) {
        img.set_pixel(r0, c, color);
        img.set_pixel(r0 + size - 1, c, color);
    }
    for (int r = r0; r < r0 + size; ++r) {
        img.set_pixel(r, c0, color);
        img.set_pixel(r, c0 + size - 1, color);
    }
}

int run_extract_edges(const std::string& image_path, const std::string& mask_path,
                      const std::string& seg_path, const umbra::SamplerConfig& cfg,
                      const std::string& out_viz, const std::string& out_json) {
    umbra::RgbImage image = umbra::load_image(image_path);
    umbra::BinaryMask shadow = umbra::load_mask(mask_path);
    umbra::LabelMap labels = load_labels_cli(seg_path, false, 0, 0);

    std::vector<umbra::EdgeSampleSet> sets = umbra::build_sample_sets(
        image, labels, shadow, cfg, umbra::SampleMode::PerRegion);
    std::vector<umbra::MaterialRegion> regions = umbra::extract_regions(labels, shadow, cfg);
    if (sets.empty()) {
        std::cerr << "no material-consistent shadow edge found\n";
    }

    const umbra::Rgb red{1.0f, 0.0f, 0.0f};
    const umbra::Rgb green{0.0f, 1.0f, 0.0f};
    umbra::RgbImage viz = image;
    ordered_json doc;
    doc["tool_version"] = umbra::kToolVersion;
    doc["config"] = {{"band_radius", cfg.band_se.radius},
                     {"band_iters", cfg.band_se.iterations},
                     {"min_area", cfg.min_region_area},
                     {"tau_band", cfg.tau_band},
                     {"patch_count", cfg.patch_count},
                     {"patch_size", cfg.patch_size},
                     {"seed", cfg.rng_seed}};
    ordered_json regions_json = ordered_json::array();
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const umbra::EdgeSampleSet& set = sets[i];
        const umbra::MaterialRegion& region = regions[i];
        ordered_json rj;
        rj["segment_id"] = set.region_id;
        rj["area"] = region.area;
        rj["in_band_count"] = region.in_band_count;
        rj["out_band_count"] = region.out_band_count;

        ordered_json inside = ordered_json::array();
        for (const umbra::Coord& c : set.inside.coords) {
            inside.push_back({c.row, c.col});
            viz.set_pixel(c.row, c.col, red);
        }
        ordered_json outside = ordered_json::array();
        for (const umbra::Coord& c : set.outside.coords) {
            outside.push_back({c.row, c.col});
            viz.set_pixel(c.row, c.col, green);
        }
        rj["inside_pixels"] = inside;
        rj["outside_pixels"] = outside;

        ordered_json patches_in = ordered_json::array();
        ordered_json patches_out = ordered_json::array();
        for (const umbra::PatchGroup& group : set.patches) {
            for (const umbra::Patch& p : group.inside) {
                patches_in.push_back({{"row", p.top_left.row},
                                      {"col", p.top_left.col},
                                      {"size", p.size}});
                draw_rect(viz, p.top_left, p.size, red);
            }
            for (const umbra::Patch& p : group.outside) {
                patches_out.push_back({{"row", p.top_left.row},
                                       {"col", p.top_left.col},
                                       {"size", p.size}});
                draw_rect(viz, p.top_left, p.size, green);
            }
        }
        rj["inside_patches"] = patches_in;
        rj["outside_patches"] = patches_out;
        regions_json.push_back(std::move(rj));
    }
    doc["regions"] = regions_json;

    umbra::save_image(viz, out_viz);
    std::ofstream json_out(out_json);
    if (!json_out) throw umbra::Error("cannot write " + out_json);
    json_out << doc.dump(2) << "\n";
    std::cout << "regions: " << sets.size() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"material-consistent shadow edge toolkit"};
    app.require_subcommand(1);

    // ---- extract-edges ----
    auto* extract = app.add_subcommand("extract-edges",
                                       "extract material-consistent shadow edge samples");
    std::string ee_image, ee_mask, ee_seg, ee_viz, ee_json;
    umbra::SamplerConfig ee_cfg;
    extract->add_option("--image", ee_image)->required();
    extract->add_option("--mask", ee_mask)->required();
    extract->add_option("--segmentation", ee_seg)->required();
    extract->add_option("--min-area", ee_cfg.min_region_area);
    extract->add_option("--tau-band", ee_cfg.tau_band);
    extract->add_option("--band-radius", ee_cfg.band_se.radius);
    extract->add_option("--band-iters", ee_cfg.band_se.iterations);
    extract->add_option("--out-viz", ee_viz)->required();
    extract->add_option("--out-json", ee_json)->required();

    // ---- refine ----
    auto* refine = app.add_subcommand("refine", "refine shadow removal on one image");
    std::string rf_image, rf_mask, rf_seg, rf_out, rf_report;
    std::string rf_mode = "global", rf_variant = "pixels-and-patches", rf_weights;
    bool rf_fallback = false;
    umbra::RefineConfig rf_cfg;
    std::uint64_t rf_seed = 0;
    refine->add_option("--image", rf_image)->required();
    refine->add_option("--mask", rf_mask)->required();
    auto* rf_seg_opt = refine->add_option("--segmentation", rf_seg);
    refine->add_flag("--fallback-single-segment", rf_fallback)->excludes(rf_seg_opt);
    refine->add_option("--mode", rf_mode)->check(CLI::IsMember({"global", "per-region"}));
    refine->add_option("--variant", rf_variant)
        ->check(CLI::IsMember({"per-mask", "pixels", "pixels-and-patches"}));
    refine->add_option("--iters", rf_cfg.max_iters);
    refine->add_option("--step", rf_cfg.step);
    refine->add_option("--fd-step", rf_cfg.fd_step);
    refine->add_option("--weights", rf_weights, "l1,l2,l3,l4");
    refine->add_option("--blend", rf_cfg.blend_width);
    refine->add_option("--seed", rf_seed);
    refine->add_option("--out", rf_out)->required();
    refine->add_option("--report", rf_report);

    // ---- cdd ----
    auto* cdd_cmd = app.add_subcommand("cdd", "color distribution difference of one image");
    std::string cd_image, cd_annotation;
    int cd_bins = 256;
    cdd_cmd->add_option("--image", cd_image)->required();
    cdd_cmd->add_option("--annotation", cd_annotation)->required();
    cdd_cmd->add_option("--bins", cd_bins);

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "evaluate or refine a whole manifest");
    std::string bn_manifest, bn_out_dir, bn_report;
    bool bn_refine = false, bn_fallback = false;
    std::uint64_t bn_seed = 0;
    bench->add_option("--manifest", bn_manifest)->required();
    bench->add_flag("--refine", bn_refine);
    bench->add_option("--out-dir", bn_out_dir);
    bench->add_option("--report", bn_report, "report path (.json or .csv)");
    bench->add_flag("--fallback-single-segment", bn_fallback);
    bench->add_option("--seed", bn_seed);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "synthesize a shadow for testing");
    std::string sy_image, sy_mask, sy_w = "0.5,0.5,0.5", sy_b = "0,0,0", sy_out;
    int sy_penumbra = 0;
    double sy_noise = 0.0;
    std::uint64_t sy_seed = 0;
    synth->add_option("--image", sy_image)->required();
    synth->add_option("--mask", sy_mask)->required();
    synth->add_option("--w", sy_w, "per-channel darkening gains")->required();
    synth->add_option("--b", sy_b, "per-channel darkening offsets")->required();
    synth->add_option("--penumbra", sy_penumbra);
    synth->add_option("--noise", sy_noise);
    synth->add_option("--seed", sy_seed);
    synth->add_option("--out", sy_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (extract->parsed()) {
            return run_extract_edges(ee_image, ee_mask, ee_seg, ee_cfg, ee_viz, ee_json);
        }

        if (refine->parsed()) {
            rf_cfg.mode = rf_mode == "global" ? umbra::RelightMode::Global
                                              : umbra::RelightMode::PerRegion;
            if (rf_variant == "per-mask") rf_cfg.variant = umbra::LossVariant::PerMask;
            if (rf_variant == "pixels") rf_cfg.variant = umbra::LossVariant::Pixels;
            if (!rf_weights.empty()) rf_cfg.weights = parse_weights(rf_weights);
            rf_cfg.sampler.rng_seed = rf_seed;

            umbra::RgbImage image = umbra::load_image(rf_image);
            umbra::BinaryMask shadow = umbra::load_mask(rf_mask);
            umbra::LabelMap labels =
                load_labels_cli(rf_seg, rf_fallback, image.height(), image.width());
            umbra::RefineResult result = umbra::optimize(image, shadow, labels, rf_cfg);
            umbra::save_image(result.output, rf_out);
            std::printf("cdd_before_x1000 %.3f\ncdd_after_x1000 %.3f\n",
                        result.cdd_before * 1000.0, result.cdd_after * 1000.0);
            std::printf("iterations %d converged %s\n", result.iterations_run,
                        result.converged ? "yes" : "no");
            if (!rf_report.empty()) {
                ordered_json doc;
                doc["tool_version"] = umbra::kToolVersion;
                doc["cdd_before_x1000"] = result.cdd_before * 1000.0;
                doc["cdd_after_x1000"] = result.cdd_after * 1000.0;
                doc["iterations_run"] = result.iterations_run;
                doc["converged"] = result.converged;
                doc["global_gain"] = result.params.global.gain;
                doc["global_offset"] = result.params.global.offset;
                ordered_json per_region = ordered_json::object();
                for (const auto& [id, a] : result.params.per_region) {
                    per_region[std::to_string(id)] = {{"gain", a.gain},
                                                      {"offset", a.offset}};
                }
                doc["per_region"] = per_region;
                ordered_json trace = ordered_json::array();
                for (const umbra::LossReport& step : result.loss_trace) {
                    trace.push_back({{"distance", step.distance},
                                     {"distribution", step.distribution},
                                     {"texture", step.texture},
                                     {"nonshadow", step.nonshadow},
                                     {"total", step.total}});
                }
                doc["loss_trace"] = trace;
                std::ofstream out(rf_report);
                if (!out) throw umbra::Error("cannot write " + rf_report);
                out << doc.dump(2) << "\n";
            }
            return 0;
        }

        if (cdd_cmd->parsed()) {
            umbra::RgbImage image = umbra::load_image(cd_image);
            umbra::Annotation annotation = umbra::load_annotation(cd_annotation);
            umbra::PixelSet s = umbra::gather_colors(image, annotation.shadow_side);
            umbra::PixelSet ns = umbra::gather_colors(image, annotation.nonshadow_side);
            std::printf("%.3f\n", umbra::cdd(s, ns, cd_bins) * 1000.0);
            return 0;
        }

        if (bench->parsed()) {
            umbra::DatasetManifest manifest = umbra::load_manifest(bn_manifest);
            if (bn_refine) {
                if (bn_out_dir.empty()) {
                    throw umbra::Error("bench --refine needs --out-dir");
                }
                umbra::BatchConfig cfg;
                cfg.out_dir = bn_out_dir;
                cfg.fallback_single_segment = bn_fallback;
                cfg.refine.sampler.rng_seed = bn_seed;
                umbra::BatchReport report = umbra::run_refine_batch(manifest, cfg);
                if (!bn_report.empty()) {
                    fs::path rp(bn_report);
                    if (rp.extension() == ".csv") {
                        umbra::write_batch_report_csv(report, rp);
                    } else {
                        umbra::write_batch_report_json(report, rp);
                    }
                }
                std::printf("cdd_mean_x1000 before %.3f after %.3f\n",
                            report.before.mean_x1000, report.after.mean_x1000);
                std::printf("cdd_var_x1000 before %.3f after %.3f\n",
                            report.before.var_x1000, report.after.var_x1000);
                for (const umbra::BatchEntryResult& r : report.entries) {
                    if (!r.error.empty()) {
                        std::cerr << "entry " << r.id << " failed: " << r.error << "\n";
                    } else if (r.no_mc_edges) {
                        std::cerr << "entry " << r.id
                                  << ": no material-consistent shadow edge found, "
                                     "copied through\n";
                    }
                }
            } else {
                umbra::EvalConfig cfg;
                umbra::EvalReport report = umbra::evaluate(manifest, cfg);
                if (!bn_report.empty()) {
                    fs::path rp(bn_report);
                    if (rp.extension() == ".csv") {
                        umbra::write_eval_report_csv(report, rp);
                    } else {
                        umbra::write_eval_report_json(report, rp);
                    }
                }
                std::printf("cdd_mean_x1000 %.3f cdd_var_x1000 %.3f\n",
                            report.aggregate.mean_x1000, report.aggregate.var_x1000);
            }
            return 0;
        }

        if (synth->parsed()) {
            umbra::RgbImage image = umbra::load_image(sy_image);
            umbra::BinaryMask mask = umbra::load_mask(sy_mask);
            umbra::RgbImage out = umbra::synth_shadow(
                image, mask, parse_triple(sy_w, "--w"), parse_triple(sy_b, "--b"),
                sy_penumbra, sy_noise, sy_seed);
            umbra::save_image(out, sy_out);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
