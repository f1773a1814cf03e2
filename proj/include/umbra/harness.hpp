#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "umbra/image.hpp"
#include "umbra/metrics.hpp"
#include "umbra/refine.hpp"

namespace umbra {

inline constexpr const char* kToolVersion = "0.1.0";

/// Edge-pixel annotation: shadow-side coordinates (drawn red in overlays)
/// and non-shadow-side coordinates (green).
struct Annotation {
    std::vector<Coord> shadow_side;
    std::vector<Coord> nonshadow_side;
};

/// Reads either a JSON document {"s": [[r,c],...], "ns": [[r,c],...]} or a
/// PNG overlay where pure red (255,0,0) marks the shadow side and pure green
/// (0,255,0) the non-shadow side; all other pixels are ignored. Throws when
/// either side is empty or a coordinate appears on both sides.
Annotation load_annotation(const std::filesystem::path& path);

/// Writes the lossless JSON form.
void save_annotation(const Annotation& annotation, const std::filesystem::path& path);

/// Writes the red/green overlay on black.
void save_annotation_overlay(const Annotation& annotation, int height, int width,
                             const std::filesystem::path& path);

/// Automatic annotation from the shadow mask: shadow side = inner band,
/// non-shadow side = outer band. Throws when either band is empty.
Annotation auto_annotate(const BinaryMask& shadow, const StructuringElement& se);

struct ManifestEntry {
    std::string id;
    std::filesystem::path image_path;
    std::filesystem::path shadow_mask_path;
    std::optional<std::filesystem::path> labelmap_path;
    std::optional<std::filesystem::path> annotation_path;
    std::optional<std::filesystem::path> result_path;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

/// JSON array of entry objects; relative paths are resolved against the
/// manifest's directory. Ids must be unique and all referenced files must
/// exist.
DatasetManifest load_manifest(const std::filesystem::path& path);

struct EvalConfig {
    int bins = 256;
    /// Used to auto-annotate entries without an annotation file.
    StructuringElement annotation_se{1, 2};
};

struct EntryEval {
    std::string id;
    double cdd_raw = 0.0;
    bool auto_annotated = false;
};

struct EvalReport {
    std::vector<EntryEval> entries;
    CddAggregate aggregate;
    EvalConfig config;
    std::string tool_version = kToolVersion;
};

/// Per-entry CDD of the result image (or of the input image when no result
/// path is set, the no-removal baseline), aggregated with cdd_aggregate.
/// Read-only; throws on missing files or empty annotations.
EvalReport evaluate(const DatasetManifest& manifest, const EvalConfig& cfg);

struct BatchConfig {
    RefineConfig refine;
    EvalConfig eval;
    std::filesystem::path out_dir;
    bool fallback_single_segment = false;  // treat the whole frame as one segment
    unsigned jobs = 0;                     // 0 = hardware concurrency
};

struct BatchEntryResult {
    std::string id;
    double cdd_before = 0.0;  // raw values; reports scale by 1000
    double cdd_after = 0.0;
    bool no_mc_edges = false;      // input copied through unchanged
    bool auto_annotated = false;
    bool fallback_single_segment = false;
    std::string error;             // nonempty when this entry failed and was skipped
    std::filesystem::path output_path;
};

struct BatchReport {
    std::vector<BatchEntryResult> entries;
    CddAggregate before;
    CddAggregate after;
    BatchConfig config;
    std::string tool_version = kToolVersion;
};

/// Refines every manifest entry, writing <id>.png and <id>_refine.json into
/// out_dir. Entries without a qualifying region are copied through unchanged
/// and flagged; per-entry failures are recorded, never abort the batch.
/// Before/after CDD is measured on the entry annotation (auto-annotated from
/// the shadow mask when no file is given). Entry-parallel; results merge in
/// manifest order.
BatchReport run_refine_batch(const DatasetManifest& manifest, const BatchConfig& cfg);

void write_eval_report_json(const EvalReport& report, const std::filesystem::path& path);
void write_eval_report_csv(const EvalReport& report, const std::filesystem::path& path);
void write_batch_report_json(const BatchReport& report, const std::filesystem::path& path);
void write_batch_report_csv(const BatchReport& report, const std::filesystem::path& path);

}  // namespace umbra
