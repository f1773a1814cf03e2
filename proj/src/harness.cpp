#include "umbra/harness.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <thread>

#include "json.hpp"
#include "umbra/image_io.hpp"
#include "umbra/morphology.hpp"

namespace umbra {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

json coord_list(const std::vector<Coord>& coords) {
    json arr = json::array();
    for (const Coord& c : coords) arr.push_back({c.row, c.col});
    return arr;
}

std::vector<Coord> parse_coord_list(const json& arr, const char* key) {
    if (!arr.is_array()) throw Error(std::string("annotation: \"") + key + "\" must be an array");
    std::vector<Coord> coords;
    coords.reserve(arr.size());
    for (const json& item : arr) {
        if (!item.is_array() || item.size() != 2) {
            throw Error(std::string("annotation: entries of \"") + key + "\" must be [row,col]");
        }
        coords.push_back({item[0].get<int>(), item[1].get<int>()});
    }
    return coords;
}

Annotation load_annotation_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open annotation: " + path.string());
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw Error("invalid JSON annotation: " + path.string());
    Annotation a;
    a.shadow_side = parse_coord_list(doc.at("s"), "s");
    a.nonshadow_side = parse_coord_list(doc.at("ns"), "ns");
    std::set<Coord> seen(a.shadow_side.begin(), a.shadow_side.end());
    for (const Coord& c : a.nonshadow_side) {
        if (seen.count(c)) {
            throw Error("annotation: coordinate (" + std::to_string(c.row) + "," +
                        std::to_string(c.col) + ") marked on both sides");
        }
    }
    return a;
}

Annotation load_annotation_overlay(const fs::path& path) {
    RgbImage overlay = load_image(path);
    Annotation a;
    for (int r = 0; r < overlay.height(); ++r) {
        for (int c = 0; c < overlay.width(); ++c) {
            Rgb px = overlay.pixel(r, c);
            if (px == Rgb{1.0f, 0.0f, 0.0f}) {
                a.shadow_side.push_back({r, c});
            } else if (px == Rgb{0.0f, 1.0f, 0.0f}) {
                a.nonshadow_side.push_back({r, c});
            }
        }
    }
    return a;
}

void require_nonempty(const Annotation& a, const std::string& origin) {
    if (a.shadow_side.empty() || a.nonshadow_side.empty()) {
        throw Error("annotation has an empty side: " + origin);
    }
}

fs::path resolve(const fs::path& base, const std::string& rel) {
    fs::path p(rel);
    return p.is_absolute() ? p : base / p;
}

// Annotation coordinates for one entry: the annotation file when present,
// otherwise bands derived from the shadow mask (the automatic scheme).
Annotation resolve_annotation(const ManifestEntry& entry, const StructuringElement& se,
                              bool* was_auto) {
    if (entry.annotation_path) {
        if (was_auto) *was_auto = false;
        return load_annotation(*entry.annotation_path);
    }
    if (was_auto) *was_auto = true;
    return auto_annotate(load_mask(entry.shadow_mask_path), se);
}

double cdd_of_image(const RgbImage& image, const Annotation& annotation, int bins) {
    PixelSet s = gather_colors(image, annotation.shadow_side);
    PixelSet ns = gather_colors(image, annotation.nonshadow_side);
    return cdd(s, ns, bins);
}

const char* variant_name(LossVariant v) {
    switch (v) {
        case LossVariant::PerMask: return "per-mask";
        case LossVariant::Pixels: return "pixels";
        case LossVariant::PixelsAndPatches: return "pixels-and-patches";
    }
    return "?";
}

ordered_json refine_config_json(const RefineConfig& cfg) {
    ordered_json j;
    j["mode"] = cfg.mode == RelightMode::Global ? "global" : "per-region";
    j["variant"] = variant_name(cfg.variant);
    j["weights"] = {cfg.weights.distance, cfg.weights.distribution, cfg.weights.texture,
                    cfg.weights.nonshadow};
    j["iters"] = cfg.max_iters;
    j["step"] = cfg.step;
    j["fd_step"] = cfg.fd_step;
    j["blend"] = cfg.blend_width;
    j["bins"] = cfg.bins;
    j["seed"] = cfg.sampler.rng_seed;
    j["band_radius"] = cfg.sampler.band_se.radius;
    j["band_iters"] = cfg.sampler.band_se.iterations;
    j["min_area"] = cfg.sampler.min_region_area;
    j["tau_band"] = cfg.sampler.tau_band;
    j["patch_count"] = cfg.sampler.patch_count;
    j["patch_size"] = cfg.sampler.patch_size;
    return j;
}

ordered_json affine_json(const ChannelAffine& a) {
    return ordered_json{{"gain", a.gain}, {"offset", a.offset}};
}

ordered_json loss_report_json(const LossReport& report) {
    return ordered_json{{"distance", report.distance},
                        {"distribution", report.distribution},
                        {"texture", report.texture},
                        {"nonshadow", report.nonshadow},
                        {"total", report.total}};
}

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

std::string format_x1000(double raw) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", raw * 1000.0);
    return buf;
}

}  // namespace

Annotation load_annotation(const fs::path& path) {
    Annotation a = path.extension() == ".json" ? load_annotation_json(path)
                                               : load_annotation_overlay(path);
    require_nonempty(a, path.string());
    return a;
}

void save_annotation(const Annotation& annotation, const fs::path& path) {
    ordered_json doc;
    doc["s"] = coord_list(annotation.shadow_side);
    doc["ns"] = coord_list(annotation.nonshadow_side);
    write_text_file(path, doc.dump(2) + "\n");
}

void save_annotation_overlay(const Annotation& annotation, int height, int width,
                             const fs::path& path) {
    RgbImage overlay(height, width, Rgb{0.0f, 0.0f, 0.0f});
    for (const Coord& c : annotation.shadow_side) {
        overlay.set_pixel(c.row, c.col, {1.0f, 0.0f, 0.0f});
    }
    for (const Coord& c : annotation.nonshadow_side) {
        overlay.set_pixel(c.row, c.col, {0.0f, 1.0f, 0.0f});
    }
    save_image(overlay, path);
}

Annotation auto_annotate(const BinaryMask& shadow, const StructuringElement& se) {
    Annotation a;
    BinaryMask inner = inner_band(shadow, se);
    BinaryMask outer = outer_band(shadow, se);
    for (int r = 0; r < shadow.height(); ++r) {
        for (int c = 0; c < shadow.width(); ++c) {
            if (inner.get(r, c)) a.shadow_side.push_back({r, c});
            if (outer.get(r, c)) a.nonshadow_side.push_back({r, c});
        }
    }
    require_nonempty(a, "auto_annotate (degenerate shadow mask)");
    return a;
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest: " + path.string());
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_array()) {
        throw Error("manifest must be a JSON array: " + path.string());
    }
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

    DatasetManifest manifest;
    std::set<std::string> ids;
    for (const json& item : doc) {
        ManifestEntry entry;
        entry.id = item.at("id").get<std::string>();
        if (!ids.insert(entry.id).second) {
            throw Error("duplicate manifest id: " + entry.id);
        }
        entry.image_path = resolve(base, item.at("image_path").get<std::string>());
        entry.shadow_mask_path = resolve(base, item.at("shadow_mask_path").get<std::string>());
        auto optional_path = [&](const char* key) -> std::optional<fs::path> {
            if (!item.contains(key) || item[key].is_null()) return std::nullopt;
            return resolve(base, item[key].get<std::string>());
        };
        entry.labelmap_path = optional_path("labelmap_path");
        entry.annotation_path = optional_path("annotation_path");
        entry.result_path = optional_path("result_path");

        auto require_exists = [&](const fs::path& p) {
            if (!fs::exists(p)) {
                throw Error("manifest entry " + entry.id + ": missing file " + p.string());
            }
        };
        require_exists(entry.image_path);
        require_exists(entry.shadow_mask_path);
        if (entry.labelmap_path) require_exists(*entry.labelmap_path);
        if (entry.annotation_path) require_exists(*entry.annotation_path);
        if (entry.result_path) require_exists(*entry.result_path);
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

EvalReport evaluate(const DatasetManifest& manifest, const EvalConfig& cfg) {
    EvalReport report;
    report.config = cfg;
    std::vector<double> raws;
    for (const ManifestEntry& entry : manifest.entries) {
        EntryEval e;
        e.id = entry.id;
        Annotation annotation =
            resolve_annotation(entry, cfg.annotation_se, &e.auto_annotated);
        RgbImage image = entry.result_path ? load_image(*entry.result_path)
                                           : load_image(entry.image_path);
        e.cdd_raw = cdd_of_image(image, annotation, cfg.bins);
        raws.push_back(e.cdd_raw);
        report.entries.push_back(std::move(e));
    }
    if (raws.empty()) throw Error("evaluate: empty manifest");
    report.aggregate = cdd_aggregate(raws);
    return report;
}

BatchReport run_refine_batch(const DatasetManifest& manifest, const BatchConfig& cfg) {
    if (manifest.entries.empty()) throw Error("run_refine_batch: empty manifest");
    fs::create_directories(cfg.out_dir);

    BatchReport report;
    report.config = cfg;
    report.entries.resize(manifest.entries.size());

    auto process = [&](const ManifestEntry& entry, BatchEntryResult& result) {
        result.id = entry.id;
        RgbImage image = load_image(entry.image_path);
        BinaryMask shadow = load_mask(entry.shadow_mask_path);
        if (shadow.height() != image.height() || shadow.width() != image.width()) {
            throw Error("shadow mask dimensions differ from image");
        }

        LabelMap labels;
        if (entry.labelmap_path) {
            labels = load_labelmap(*entry.labelmap_path).labels;
        } else if (cfg.fallback_single_segment) {
            labels = LabelMap(image.height(), image.width(), 1);
            result.fallback_single_segment = true;
        } else {
            throw Error("no labelmap; use fallback_single_segment to treat the frame "
                        "as one segment");
        }

        Annotation annotation =
            resolve_annotation(entry, cfg.eval.annotation_se, &result.auto_annotated);
        result.cdd_before = cdd_of_image(image, annotation, cfg.eval.bins);

        RgbImage output;
        ordered_json detail;
        detail["id"] = entry.id;
        try {
            RefineResult refined = optimize(image, shadow, labels, cfg.refine);
            output = std::move(refined.output);
            ordered_json params;
            params["global"] = affine_json(refined.params.global);
            ordered_json per_region = ordered_json::object();
            for (const auto& [id, affine] : refined.params.per_region) {
                per_region[std::to_string(id)] = affine_json(affine);
            }
            params["per_region"] = per_region;
            detail["params"] = params;
            detail["iterations_run"] = refined.iterations_run;
            detail["converged"] = refined.converged;
            detail["band_cdd_before"] = refined.cdd_before;
            detail["band_cdd_after"] = refined.cdd_after;
            ordered_json trace = ordered_json::array();
            for (const LossReport& step : refined.loss_trace) {
                trace.push_back(loss_report_json(step));
            }
            detail["loss_trace"] = trace;
        } catch (const NoEdgesError&) {
            // nothing to adapt to: pass the input through, flagged
            result.no_mc_edges = true;
            output = image;
            detail["no_mc_edges"] = true;
        }
        result.cdd_after = cdd_of_image(output, annotation, cfg.eval.bins);
        detail["cdd_before"] = result.cdd_before;
        detail["cdd_after"] = result.cdd_after;
        detail["cdd_before_x1000"] = result.cdd_before * 1000.0;
        detail["cdd_after_x1000"] = result.cdd_after * 1000.0;

        result.output_path = entry.id + ".png";
        save_image(output, cfg.out_dir / result.output_path);
        write_text_file(cfg.out_dir / (entry.id + "_refine.json"), detail.dump(2) + "\n");
    };

    const std::size_t n = manifest.entries.size();
    unsigned jobs = cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            BatchEntryResult& result = report.entries[i];
            try {
                process(manifest.entries[i], result);
            } catch (const std::exception& e) {
                result.id = manifest.entries[i].id;
                result.error = e.what();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    std::vector<double> before;
    std::vector<double> after;
    for (const BatchEntryResult& r : report.entries) {
        if (!r.error.empty()) continue;
        before.push_back(r.cdd_before);
        after.push_back(r.cdd_after);
    }
    if (before.empty()) throw Error("run_refine_batch: every entry failed");
    report.before = cdd_aggregate(before);
    report.after = cdd_aggregate(after);
    return report;
}

void write_eval_report_json(const EvalReport& report, const fs::path& path) {
    ordered_json doc;
    doc["tool_version"] = report.tool_version;
    doc["config"] = {{"bins", report.config.bins},
                     {"band_radius", report.config.annotation_se.radius},
                     {"band_iters", report.config.annotation_se.iterations}};
    ordered_json entries = ordered_json::array();
    for (const EntryEval& e : report.entries) {
        entries.push_back(ordered_json{{"id", e.id},
                                       {"cdd_x1000", e.cdd_raw * 1000.0},
                                       {"auto_annotated", e.auto_annotated}});
    }
    doc["entries"] = entries;
    doc["aggregate"] = {{"cdd_mean_x1000", report.aggregate.mean_x1000},
                        {"cdd_var_x1000", report.aggregate.var_x1000}};
    write_text_file(path, doc.dump(2) + "\n");
}

void write_eval_report_csv(const EvalReport& report, const fs::path& path) {
    std::string text = "id,cdd_before,cdd_after\n";
    for (const EntryEval& e : report.entries) {
        text += e.id + "," + format_x1000(e.cdd_raw) + ",\n";
    }
    write_text_file(path, text);
}

void write_batch_report_json(const BatchReport& report, const fs::path& path) {
    ordered_json doc;
    doc["tool_version"] = report.tool_version;
    ordered_json config = refine_config_json(report.config.refine);
    config["fallback_single_segment"] = report.config.fallback_single_segment;
    doc["config"] = config;
    ordered_json entries = ordered_json::array();
    for (const BatchEntryResult& r : report.entries) {
        ordered_json e;
        e["id"] = r.id;
        if (r.error.empty()) {
            e["cdd_before_x1000"] = r.cdd_before * 1000.0;
            e["cdd_after_x1000"] = r.cdd_after * 1000.0;
            e["no_mc_edges"] = r.no_mc_edges;
            e["auto_annotated"] = r.auto_annotated;
            e["fallback_single_segment"] = r.fallback_single_segment;
            e["output"] = r.output_path.string();
        } else {
            e["error"] = r.error;
        }
        entries.push_back(std::move(e));
    }
    doc["entries"] = entries;
    doc["aggregate"] = {{"before",
                         {{"cdd_mean_x1000", report.before.mean_x1000},
                          {"cdd_var_x1000", report.before.var_x1000}}},
                        {"after",
                         {{"cdd_mean_x1000", report.after.mean_x1000},
                          {"cdd_var_x1000", report.after.var_x1000}}}};
    write_text_file(path, doc.dump(2) + "\n");
}

void write_batch_report_csv(const BatchReport& report, const fs::path& path) {
    std::string text = "id,cdd_before,cdd_after\n";
    for (const BatchEntryResult& r : report.entries) {
        if (r.error.empty()) {
            text += r.id + "," + format_x1000(r.cdd_before) + "," +
                    format_x1000(r.cdd_after) + "\n";
        } else {
            text += r.id + ",,\n";
        }
    }
    write_text_file(path, text);
}

}  // namespace umbra
