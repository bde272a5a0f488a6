#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tamperlab/concentration.hpp"
#include "tamperlab/labeling.hpp"

namespace tamperlab {

enum class Manipulation {
    intra_class_replacement,
    inter_class_replacement,
    object_removal,
    object_addition,
    color_change,
    motion_change,
    material_change,
    background_change,
    multi_edit,
};

inline constexpr std::array<Manipulation, 9> kAllManipulations = {
    Manipulation::intra_class_replacement, Manipulation::inter_class_replacement,
    Manipulation::object_removal,          Manipulation::object_addition,
    Manipulation::color_change,            Manipulation::motion_change,
    Manipulation::material_change,         Manipulation::background_change,
    Manipulation::multi_edit,
};

std::string to_string(Manipulation m);
Manipulation parse_manipulation(const std::string& s);

/// Edits driven by an object mask; only these get the overlap check.
bool uses_guide_mask(Manipulation m);

struct EditDescriptor {
    Manipulation manipulation = Manipulation::object_removal;
    std::string orig_class;                ///< target / added category; empty for background
    std::optional<std::string> repl_class; ///< inter-class replacement only

    friend bool operator==(const EditDescriptor&, const EditDescriptor&) = default;
};

/// One-sentence description for a single edit.
std::string describe(Manipulation m, const std::string& orig_class,
                     const std::optional<std::string>& repl_class = std::nullopt);
std::string describe(const EditDescriptor& edit);

/// Newline-joined single-edit sentences in the applied order (2 or 3 edits).
std::string describe_multi(const std::vector<EditDescriptor>& edits);

enum class RecordStatus { retained, rejected, pending_review };

std::string to_string(RecordStatus s);
RecordStatus parse_record_status(const std::string& s);

struct RecordPaths {
    std::string original;
    std::string tampered;
    std::string diff_map;
    std::string pixel_label;
    std::optional<std::string> guide_mask;

    friend bool operator==(const RecordPaths&, const RecordPaths&) = default;
};

struct SampleRecord {
    std::string id;
    RecordPaths paths;
    std::optional<Manipulation> manipulation; ///< absent when the source manifest omits it
    std::vector<EditDescriptor> edit_sequence;
    std::vector<std::string> semantic_labels;
    double tau = kDefaultTau;
    std::int64_t tampered_size = 0;
    SizeBucket size_bucket = SizeBucket::small;
    std::optional<int> vlm_fidelity;  ///< 0-10, ingested
    std::optional<int> human_realism; ///< 1-5, from review
    std::optional<std::string> reviewer;
    std::string generator;
    std::optional<double> overlap;    ///< only for guide-mask edits
    std::optional<ConcentrationScores> concentration;
    bool rectified = false;
    std::vector<CheckVerdict> verdicts;
    std::string description;
    RecordStatus status = RecordStatus::pending_review;

    bool retained() const { return status == RecordStatus::retained; }

    /// Checks the structural invariants; throws schema_violation.
    void validate() const;

    friend bool operator==(const SampleRecord& a, const SampleRecord& b);
};

struct FilterThresholds {
    std::int64_t magnitude_lo = kMagnitudeLo;
    std::int64_t magnitude_hi = kMagnitudeHi;
    int vlm_min = 9;
    int human_min = 4;
    double min_overlap = kMinOverlap;
};

/// Re-derives verdicts from the measurements already stored on the record
/// (tampered_size, overlap, concentration, scores) and sets the status.
/// Verdict order: magnitude, fidelity_vlm, fidelity_human, overlap,
/// concentration. A missing human score yields pending_review when every
/// evaluated gate passed; a missing VLM score fails fidelity_vlm.
SampleRecord run_filter_chain(SampleRecord record, const FilterThresholds& thresholds = {});

/// Stores size, bucket, tau, overlap (when a guide mask is given) and
/// concentration scores on the record, then runs the gates.
SampleRecord run_filter_chain(SampleRecord record, const LabelArtifacts& artifacts,
                              const BinaryLabel* guide_mask,
                              const std::optional<ConcentrationScores>& scores,
                              const FilterThresholds& thresholds = {});

nlohmann::ordered_json to_json(const SampleRecord& r);
SampleRecord record_from_json(const nlohmann::json& j);

/// JSON lines, one record per line, fixed field order.
void write_records(const std::vector<SampleRecord>& records, const std::filesystem::path& path);
std::string serialize_records(const std::vector<SampleRecord>& records);
/// Throws schema_violation naming the offending 1-based line.
std::vector<SampleRecord> read_records(const std::filesystem::path& path);

/// Resolves a record path; relative entries are relative to the records file's directory.
std::filesystem::path resolve_record_path(const std::filesystem::path& records_file,
                                          const std::string& entry);

struct SplitTargets {
    std::array<double, 3> size_ratio = {4.0, 3.0, 3.0}; ///< small : medium : large
    std::optional<std::int64_t> per_class_cap;
    std::map<Manipulation, double> type_weights;       ///< empty: no type stage
    std::optional<std::int64_t> total;                 ///< cap on the selection size
};

struct SplitResult {
    std::vector<std::string> ids; ///< ascending
    bool feasible = true;
    std::string diagnostic;
    std::array<std::int64_t, 3> bucket_counts{};
};

/// Seeded stratified selection: per-class cap, then per-type quotas, then
/// the largest size-bucket allocation matching size_ratio (each bucket
/// within one sample of the exact proportion).
SplitResult balanced_split(const std::vector<SampleRecord>& records, const SplitTargets& targets,
                           std::uint64_t seed);

} // namespace tamperlab
