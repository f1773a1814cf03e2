// End-to-end runs of every CLI subcommand. Needs the binary path in
// UMBRA_CLI (ctest sets it); the cases are skipped otherwise.

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "umbra/harness.hpp"
#include "umbra/image_io.hpp"
#include "umbra/refine.hpp"

using namespace umbra;
namespace fs = std::filesystem;

namespace {

const char* cli_path() {
    return std::getenv("UMBRA_CLI");
}

int run_cli(const std::string& args) {
    std::string cmd = std::string("\"") + cli_path() + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

fs::path make_inputs() {
    fs::path dir = fs::temp_directory_path() / "umbra_unit_cli";
    fs::remove_all(dir);
    fs::create_directories(dir / "segdir");

    const int n = 96;
    RgbImage clean = oracle::palette_texture(n, n, 3, 8, 0.55f, 0.2f);
    BinaryMask shadow = oracle::left_half_mask(n, n);
    RgbImage mask_img(n, n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            float v = shadow.get(r, c) ? 1.0f : 0.0f;
            mask_img.set_pixel(r, c, {v, v, v});
        }
    }
    save_image(clean, dir / "clean.png");
    save_image(mask_img, dir / "mask.png");
    save_image(RgbImage(n, n, {1.0f, 1.0f, 1.0f}), dir / "segdir" / "seg_1.png");
    save_annotation(auto_annotate(shadow, {1, 2}), dir / "anno.json");
    return dir;
}

}  // namespace

TEST_CASE("CLI subcommands run end to end") {
    if (!cli_path()) {
        MESSAGE("UMBRA_CLI not set; skipping CLI integration cases");
        return;
    }
    fs::path dir = make_inputs();
    std::string d = dir.string() + "/";

    REQUIRE(run_cli("synth --image " + d + "clean.png --mask " + d + "mask.png" +
                    " --w 0.5,0.5,0.5 --b 0,0,0 --noise 0.004 --seed 7 --out " + d +
                    "shadowed.png") == 0);
    CHECK(fs::exists(dir / "shadowed.png"));

    REQUIRE(run_cli("extract-edges --image " + d + "shadowed.png --mask " + d +
                    "mask.png --segmentation " + d + "segdir --min-area 100" +
                    " --tau-band 10 --band-radius 1 --band-iters 2 --out-viz " + d +
                    "viz.png --out-json " + d + "samples.json") == 0);
    {
        std::ifstream in(dir / "samples.json");
        nlohmann::json doc = nlohmann::json::parse(in);
        REQUIRE(doc["regions"].size() == 1);
        CHECK(doc["regions"][0]["segment_id"] == 1);
        CHECK(!doc["regions"][0]["inside_pixels"].empty());
    }

    REQUIRE(run_cli("refine --image " + d + "shadowed.png --mask " + d + "mask.png" +
                    " --segmentation " + d + "segdir --variant pixels-and-patches" +
                    " --iters 60 --blend 0 --seed 0 --out " + d + "refined.png" +
                    " --report " + d + "refine.json") == 0);
    CHECK(fs::exists(dir / "refined.png"));

    // the refined image must score much better than the shadowed one
    Annotation anno = load_annotation(dir / "anno.json");
    RgbImage shadowed = load_image(dir / "shadowed.png");
    RgbImage refined = load_image(dir / "refined.png");
    double before = cdd(gather_colors(shadowed, anno.shadow_side),
                        gather_colors(shadowed, anno.nonshadow_side), 256);
    double after = cdd(gather_colors(refined, anno.shadow_side),
                       gather_colors(refined, anno.nonshadow_side), 256);
    CHECK(after < 0.3 * before);

    REQUIRE(run_cli("cdd --image " + d + "refined.png --annotation " + d +
                    "anno.json --bins 256") == 0);

    std::ofstream(dir / "manifest.json")
        << R"([{"id": "a", "image_path": "shadowed.png", "shadow_mask_path": "mask.png",)"
        << R"( "labelmap_path": "segdir", "annotation_path": "anno.json"}])";
    REQUIRE(run_cli("bench --manifest " + d + "manifest.json --report " + d +
                    "eval.csv") == 0);
    CHECK(fs::exists(dir / "eval.csv"));
    REQUIRE(run_cli("bench --manifest " + d + "manifest.json --refine --out-dir " + d +
                    "out --report " + d + "batch.json --seed 0") == 0);
    CHECK(fs::exists(dir / "out" / "a.png"));
    CHECK(fs::exists(dir / "batch.json"));

    // bad invocations fail without crashing
    CHECK(run_cli("refine --image " + d + "missing.png --mask " + d +
                  "mask.png --fallback-single-segment --out " + d + "x.png") != 0);
    CHECK(run_cli("cdd --image " + d + "clean.png") != 0);
}
