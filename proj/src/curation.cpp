#include "tamperlab/curation.hpp"

#include <fstream>
#include <sstream>

#include "tamperlab/codec.hpp"

namespace tamperlab {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct ManipulationName {
    Manipulation value;
    const char* name;
};

constexpr std::array<ManipulationName, 9> kManipulationNames = {{
    {Manipulation::intra_class_replacement, "intra_class_replacement"},
    {Manipulation::inter_class_replacement, "inter_class_replacement"},
    {Manipulation::object_removal, "object_removal"},
    {Manipulation::object_addition, "object_addition"},
    {Manipulation::color_change, "color_change"},
    {Manipulation::motion_change, "motion_change"},
    {Manipulation::material_change, "material_change"},
    {Manipulation::background_change, "background_change"},
    {Manipulation::multi_edit, "multi_edit"},
}};

[[noreturn]] void schema_error(const std::string& what)
{
    throw Error(Errc::schema_violation, what);
}

template <typename T>
ordered_json opt(const std::optional<T>& v)
{
    return v ? ordered_json(*v) : ordered_json();
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return j.at(key).get<T>();
}

ordered_json edit_to_json(const EditDescriptor& e)
{
    ordered_json j;
    j["manipulation"] = to_string(e.manipulation);
    j["orig_class"] = e.orig_class;
    j["repl_class"] = opt(e.repl_class);
    return j;
}

EditDescriptor edit_from_json(const json& j)
{
    EditDescriptor e;
    e.manipulation = parse_manipulation(j.at("manipulation").get<std::string>());
    e.orig_class = j.value("orig_class", std::string());
    e.repl_class = get_opt<std::string>(j, "repl_class");
    return e;
}

} // namespace

std::string to_string(Manipulation m)
{
    for (const auto& [value, name] : kManipulationNames)
        if (value == m)
            return name;
    return "unknown";
}

Manipulation parse_manipulation(const std::string& s)
{
    for (const auto& [value, name] : kManipulationNames)
        if (s == name)
            return value;
    throw Error(Errc::invalid_argument, "unknown manipulation '" + s + "'");
}

bool uses_guide_mask(Manipulation m)
{
    return m == Manipulation::intra_class_replacement || m == Manipulation::inter_class_replacement
           || m == Manipulation::object_removal;
}

std::string describe(Manipulation m, const std::string& orig_class,
                     const std::optional<std::string>& repl_class)
{
    if (m == Manipulation::multi_edit)
        throw Error(Errc::invalid_argument, "multi_edit is described edit by edit");
    if (m == Manipulation::inter_class_replacement && !repl_class)
        throw Error(Errc::missing_replacement_class, "inter-class replacement needs a target class");
    if (m != Manipulation::inter_class_replacement && repl_class)
        throw Error(Errc::invalid_argument, "replacement class given for " + to_string(m));
    if (m != Manipulation::background_change && orig_class.empty())
        throw Error(Errc::invalid_argument, to_string(m) + " needs an object class");

    switch (m) {
    case Manipulation::background_change:
        return "The background was changed while keeping the foreground unchanged.";
    case Manipulation::object_removal:
        return "The " + orig_class + " was removed from the image.";
    case Manipulation::object_addition:
        return "A " + orig_class + " was added to the image.";
    case Manipulation::intra_class_replacement:
        return "The " + orig_class + " was replaced with a different-looking " + orig_class + ".";
    case Manipulation::inter_class_replacement:
        return "The " + orig_class + " was replaced with a " + *repl_class + ".";
    case Manipulation::color_change:
        return "The color of the " + orig_class + " was changed.";
    case Manipulation::motion_change:
        return "The " + orig_class + " was edited to show a small motion change.";
    case Manipulation::material_change:
        return "The material appearance of the " + orig_class + " was changed.";
    case Manipulation::multi_edit:
        break;
    }
    return {};
}

std::string describe(const EditDescriptor& edit)
{
    return describe(edit.manipulation, edit.orig_class, edit.repl_class);
}

std::string describe_multi(const std::vector<EditDescriptor>& edits)
{
    if (edits.size() < 2 || edits.size() > 3)
        throw Error(Errc::bad_arity, "multi-edit descriptions take 2 or 3 edits, got "
                                         + std::to_string(edits.size()));
    std::string out;
    for (std::size_t i = 0; i < edits.size(); ++i) {
        if (i > 0)
            out += '\n';
        out += describe(edits[i]);
    }
    return out;
}

std::string to_string(RecordStatus s)
{
    switch (s) {
    case RecordStatus::retained: return "retained";
    case RecordStatus::rejected: return "rejected";
    case RecordStatus::pending_review: return "pending_review";
    }
    return "rejected";
}

RecordStatus parse_record_status(const std::string& s)
{
    if (s == "retained")
        return RecordStatus::retained;
    if (s == "rejected")
        return RecordStatus::rejected;
    if (s == "pending_review")
        return RecordStatus::pending_review;
    throw Error(Errc::invalid_argument, "unknown record status '" + s + "'");
}

void SampleRecord::validate() const
{
    if (id.empty())
        schema_error("record id is empty");
    const bool multi = manipulation == Manipulation::multi_edit;
    if (multi && (edit_sequence.size() < 2 || edit_sequence.size() > 3))
        schema_error(id + ": multi_edit needs 2 or 3 edits");
    if (!multi && edit_sequence.size() > 1)
        schema_error(id + ": only multi_edit carries several edits");
    if (manipulation && *manipulation != Manipulation::background_change && semantic_labels.empty())
        schema_error(id + ": tampered sample without semantic labels");
    if (vlm_fidelity && (*vlm_fidelity < 0 || *vlm_fidelity > 10))
        schema_error(id + ": vlm_fidelity outside 0-10");
    if (human_realism && (*human_realism < 1 || *human_realism > 5))
        schema_error(id + ": human_realism outside 1-5");
    if (tampered_size < 0)
        schema_error(id + ": negative tampered_size");
    if (status == RecordStatus::retained) {
        for (const auto& v : verdicts)
            if (!v.passed)
                schema_error(id + ": retained despite failed check " + v.name);
        if (!vlm_fidelity || !human_realism)
            schema_error(id + ": retained without fidelity scores");
    }
}

bool operator==(const SampleRecord& a, const SampleRecord& b)
{
    auto conc_eq = [](const std::optional<ConcentrationScores>& x,
                      const std::optional<ConcentrationScores>& y) {
        if (x.has_value() != y.has_value())
            return false;
        return !x || (x->r_grid == y->r_grid && x->r_dens == y->r_dens);
    };
    return a.id == b.id && a.paths == b.paths && a.manipulation == b.manipulation
           && a.edit_sequence == b.edit_sequence && a.semantic_labels == b.semantic_labels
           && a.tau == b.tau && a.tampered_size == b.tampered_size
           && a.size_bucket == b.size_bucket && a.vlm_fidelity == b.vlm_fidelity
           && a.human_realism == b.human_realism && a.reviewer == b.reviewer
           && a.generator == b.generator && a.overlap == b.overlap
           && conc_eq(a.concentration, b.concentration) && a.rectified == b.rectified
           && a.verdicts == b.verdicts && a.description == b.description && a.status == b.status;
}

SampleRecord run_filter_chain(SampleRecord r, const FilterThresholds& t)
{
    r.verdicts.clear();
    r.verdicts.push_back(edit_magnitude_check(r.tampered_size, t.magnitude_lo, t.magnitude_hi));

    const std::string vlm_bounds = ">= " + std::to_string(t.vlm_min);
    if (r.vlm_fidelity)
        r.verdicts.push_back({"fidelity_vlm", *r.vlm_fidelity >= t.vlm_min,
                              double(*r.vlm_fidelity), vlm_bounds});
    else
        r.verdicts.push_back({"fidelity_vlm", false, -1.0, vlm_bounds + " (score missing)"});

    if (r.human_realism)
        r.verdicts.push_back({"fidelity_human", *r.human_realism >= t.human_min,
                              double(*r.human_realism), ">= " + std::to_string(t.human_min)});

    if (r.overlap)
        r.verdicts.push_back(pixel_semantic_check(*r.overlap, t.min_overlap));

    if (r.concentration) {
        const int row = concentration_case(*r.concentration);
        const bool ok = classify_concentration(*r.concentration) == ConcentrationClass::concentrated;
        std::ostringstream bounds;
        bounds << "decision case " << row << " (r_dens=" << r.concentration->r_dens << ")";
        r.verdicts.push_back({"concentration", ok, r.concentration->r_grid, bounds.str()});
    } else {
        r.verdicts.push_back({"concentration", false, 0.0, "empty label"});
    }

    const bool all_passed = std::all_of(r.verdicts.begin(), r.verdicts.end(),
                                        [](const CheckVerdict& v) { return v.passed; });
    if (!all_passed)
        r.status = RecordStatus::rejected;
    else if (!r.human_realism)
        r.status = RecordStatus::pending_review;
    else
        r.status = RecordStatus::retained;
    return r;
}

SampleRecord run_filter_chain(SampleRecord r, const LabelArtifacts& artifacts,
                              const BinaryLabel* guide_mask,
                              const std::optional<ConcentrationScores>& scores,
                              const FilterThresholds& t)
{
    r.tau = artifacts.tau;
    r.tampered_size = artifacts.tampered_size;
    r.size_bucket = size_bucket(artifacts.tampered_size);
    r.overlap.reset();
    const bool mask_guided = !r.manipulation || uses_guide_mask(*r.manipulation);
    if (guide_mask && mask_guided) {
        if (guide_mask->count() == 0)
            r.overlap = 0.0;
        else
            r.overlap = overlap_ratio(artifacts.label, *guide_mask);
    }
    r.concentration = scores;
    return run_filter_chain(std::move(r), t);
}

ordered_json to_json(const SampleRecord& r)
{
    ordered_json j;
    j["id"] = r.id;
    ordered_json paths;
    paths["original"] = r.paths.original;
    paths["tampered"] = r.paths.tampered;
    paths["diff_map"] = r.paths.diff_map;
    paths["pixel_label"] = r.paths.pixel_label;
    paths["guide_mask"] = opt(r.paths.guide_mask);
    j["paths"] = paths;
    j["manipulation"] = r.manipulation ? ordered_json(to_string(*r.manipulation)) : ordered_json();
    j["edit_sequence"] = ordered_json::array();
    for (const auto& e : r.edit_sequence)
        j["edit_sequence"].push_back(edit_to_json(e));
    j["semantic_labels"] = r.semantic_labels;
    j["tau"] = r.tau;
    j["tampered_size"] = r.tampered_size;
    j["size_bucket"] = to_string(r.size_bucket);
    j["vlm_fidelity"] = opt(r.vlm_fidelity);
    j["human_realism"] = opt(r.human_realism);
    j["reviewer"] = opt(r.reviewer);
    j["generator"] = r.generator;
    j["overlap"] = opt(r.overlap);
    if (r.concentration) {
        ordered_json c;
        c["r_grid"] = r.concentration->r_grid;
        c["r_dens"] = r.concentration->r_dens;
        c["tie_break"] = r.concentration->tie_break();
        j["concentration"] = c;
    } else {
        j["concentration"] = nullptr;
    }
    j["rectified"] = r.rectified;
    j["verdicts"] = ordered_json::array();
    for (const auto& v : r.verdicts) {
        ordered_json vj;
        vj["name"] = v.name;
        vj["passed"] = v.passed;
        vj["measured"] = v.measured;
        vj["bounds"] = v.bounds;
        j["verdicts"].push_back(vj);
    }
    j["description"] = r.description;
    j["status"] = to_string(r.status);
    j["retained"] = r.retained();
    return j;
}

SampleRecord record_from_json(const json& j)
{
    try {
        SampleRecord r;
        r.id = j.at("id").get<std::string>();
        const auto& p = j.at("paths");
        r.paths.original = p.at("original").get<std::string>();
        r.paths.tampered = p.at("tampered").get<std::string>();
        r.paths.diff_map = p.at("diff_map").get<std::string>();
        r.paths.pixel_label = p.at("pixel_label").get<std::string>();
        r.paths.guide_mask = get_opt<std::string>(p, "guide_mask");
        if (auto m = get_opt<std::string>(j, "manipulation"))
            r.manipulation = parse_manipulation(*m);
        for (const auto& e : j.value("edit_sequence", json::array()))
            r.edit_sequence.push_back(edit_from_json(e));
        r.semantic_labels = j.value("semantic_labels", std::vector<std::string>{});
        r.tau = j.at("tau").get<double>();
        r.tampered_size = j.at("tampered_size").get<std::int64_t>();
        r.size_bucket = parse_size_bucket(j.at("size_bucket").get<std::string>());
        r.vlm_fidelity = get_opt<int>(j, "vlm_fidelity");
        r.human_realism = get_opt<int>(j, "human_realism");
        r.reviewer = get_opt<std::string>(j, "reviewer");
        r.generator = j.value("generator", std::string());
        r.overlap = get_opt<double>(j, "overlap");
        if (j.contains("concentration") && !j.at("concentration").is_null())
            r.concentration = ConcentrationScores{j["concentration"].at("r_grid").get<double>(),
                                                  j["concentration"].at("r_dens").get<double>()};
        r.rectified = j.value("rectified", false);
        for (const auto& v : j.value("verdicts", json::array()))
            r.verdicts.push_back({v.at("name").get<std::string>(), v.at("passed").get<bool>(),
                                  v.at("measured").get<double>(), v.value("bounds", std::string())});
        r.description = j.value("description", std::string());
        r.status = parse_record_status(j.at("status").get<std::string>());
        if (j.contains("retained") && j.at("retained").get<bool>() != r.retained())
            schema_error(r.id + ": retained flag disagrees with status");
        r.validate();
        return r;
    } catch (const json::exception& e) {
        schema_error(e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::schema_violation)
            throw;
        schema_error(e.what());
    }
}

std::string serialize_records(const std::vector<SampleRecord>& records)
{
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

void write_records(const std::vector<SampleRecord>& records, const fs::path& path)
{
    const std::string text = serialize_records(records);
    write_file_atomic(path, Bytes(text.begin(), text.end()));
}

std::vector<SampleRecord> read_records(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::io_error, "cannot open " + path.string());
    std::vector<SampleRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            records.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            schema_error("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            schema_error("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

fs::path resolve_record_path(const fs::path& records_file, const std::string& entry)
{
    const fs::path p(entry);
    if (p.is_absolute())
        return p;
    return records_file.parent_path() / p;
}

} // namespace tamperlab
