#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tamperlab/config.hpp"
#include "tamperlab/curation.hpp"
#include "tamperlab/metrics.hpp"

namespace tamperlab {

namespace fs = std::filesystem;

struct ManifestEntry {
    std::string id;
    fs::path original;
    fs::path tampered;
    std::optional<fs::path> guide_mask;
    std::optional<Manipulation> manipulation;
    std::vector<std::string> labels;
    std::vector<EditDescriptor> edits;
    std::optional<int> vlm_fidelity;
    std::optional<int> human_realism;
    std::string generator;
};

/// Tab-separated rows of `original  tampered  [guide_mask]`. A first line
/// starting with `#` that names columns (original, tampered, guide_mask, id,
/// manipulation, labels, vlm_fidelity, human_realism, generator, edits)
/// switches to named columns. Other `#` lines and blank lines are skipped.
/// Relative paths resolve against `base_dir`. Missing ids come from the
/// tampered file stem, suffixed _2, _3, ... when repeated.
std::vector<ManifestEntry> parse_manifest(const std::string& text, const fs::path& base_dir);
std::vector<ManifestEntry> load_manifest(const fs::path& path);

/// `removal:dog;inter_class_replacement:cat>fox` style edit lists.
std::vector<EditDescriptor> parse_edit_list(const std::string& text);

struct LabelSummary {
    std::size_t processed = 0;
    std::size_t skipped = 0;
    std::vector<std::string> errors;
    std::vector<SampleRecord> records; ///< sorted by id
    fs::path records_path;
};

/// Runs rectify, diff, threshold and the gates for one pair. Pure: no I/O
/// beyond reading the inputs.
struct PairOutcome {
    SampleRecord record;
    LabelArtifacts artifacts;
};
PairOutcome label_pair(const ManifestEntry& entry, const PipelineConfig& cfg);

/// Writes out/diff/<id>.png, out/label/<id>.png, out/meta/<id>.json per pair
/// and out/records.jsonl. Pairs whose three outputs exist are skipped unless
/// `force`. Per-pair failures land in `errors` and never stop the batch.
LabelSummary run_label(const std::vector<ManifestEntry>& entries, const PipelineConfig& cfg,
                       const fs::path& out_dir, bool force);

struct TauRow {
    double tau = 0.0;
    std::size_t pairs = 0;
    std::int64_t min_size = 0;
    std::int64_t max_size = 0;
    double mean_size = 0.0;
    double median_size = 0.0;
    std::array<std::int64_t, 3> bucket_counts{};
};

struct SweepResult {
    std::vector<TauRow> rows;
    std::vector<std::string> ids;
    std::vector<std::vector<std::int64_t>> sizes; ///< sizes[pair][tau]
    std::vector<std::string> errors;
};

SweepResult run_sweep_tau(const std::vector<ManifestEntry>& entries, const std::vector<double>& taus,
                          const PipelineConfig& cfg);
std::string format_sweep(const SweepResult& sweep);

/// Reads pred_dir/<id>.png (16-bit or 8-bit probability) and optional
/// pred_dir/<id>.scores.json ({"classes": [...], "scores": [...]}).
EvalReport run_eval(const fs::path& pred_dir, const fs::path& records_path, bool include_rejected);

/// Fills every record's description from its edit sequence. Records lacking
/// the needed classes keep their current text.
std::vector<SampleRecord> fill_descriptions(std::vector<SampleRecord> records);

/// Evaluates the loss kernels on arrays given as JSON and returns values and
/// gradients. Keys: sem, bce, dice, cls, text, weights.
nlohmann::ordered_json evaluate_losses(const nlohmann::json& input);

} // namespace tamperlab
