#include "tamperlab/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "tamperlab/codec.hpp"
#include "tamperlab/concentration.hpp"
#include "tamperlab/labeling.hpp"
#include "tamperlab/losses.hpp"
#include "tamperlab/rectify.hpp"

namespace tamperlab {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string part;
    std::istringstream in(s);
    while (std::getline(in, part, sep))
        out.push_back(part);
    if (!s.empty() && s.back() == sep)
        out.emplace_back();
    return out;
}

int parse_int_field(const std::string& name, const std::string& value, std::size_t lineno)
{
    int out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw Error(Errc::manifest_parse_error,
                    "line " + std::to_string(lineno) + ": bad " + name + " '" + value + "'");
    return out;
}

std::string sanitize_id(const std::string& s)
{
    std::string out;
    for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out.empty() ? std::string("pair") : out;
}

const std::set<std::string> kColumns = {"original", "tampered",      "guide_mask", "id",
                                        "manipulation", "labels",    "vlm_fidelity",
                                        "human_realism", "generator", "edits"};

fs::path resolve(const fs::path& base, const std::string& p)
{
    fs::path path(p);
    if (path.is_relative())
        path = base / path;
    return path.lexically_normal();
}

ordered_json read_json_file(const fs::path& path)
{
    const auto bytes = read_file(path);
    try {
        return ordered_json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, path.string() + ": " + e.what());
    }
}

bool same_bytes(const fs::path& path, const std::string& content)
{
    std::error_code ec;
    if (!fs::exists(path, ec))
        return false;
    const auto bytes = read_file(path);
    return bytes.size() == content.size() && std::equal(bytes.begin(), bytes.end(), content.begin());
}

// Runs fn(i) for every i in [0, n) on `workers` threads; fn must not throw.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn)
{
    const auto nthreads = std::min<std::size_t>(std::max(workers, 1), std::max<std::size_t>(n, 1));
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
                fn(i);
        });
    for (auto& th : pool)
        th.join();
}

// Loads both images and brings gen into orig's frame.
std::pair<Image, Image> aligned_pair(const ManifestEntry& entry, const PipelineConfig& cfg,
                                     bool& rectified)
{
    Image orig = load_image(entry.original);
    Image gen = load_image(entry.tampered);
    if (orig.channels() != gen.channels()) {
        orig = to_rgb(orig);
        gen = to_rgb(gen);
    }
    rectified = false;
    if (cfg.rectify) {
        auto r = rectify_pair(orig, gen, cfg.rectify_cfg);
        rectified = !r.fell_back;
        return {std::move(orig), std::move(r.aligned)};
    }
    Image resized = resize_bilinear(gen, orig.height(), orig.width());
    return {std::move(orig), std::move(resized)};
}

std::vector<std::string> classes_of(const std::vector<EditDescriptor>& edits)
{
    std::vector<std::string> out;
    for (const auto& e : edits) {
        for (const auto* c : {&e.orig_class, e.repl_class ? &*e.repl_class : nullptr})
            if (c && !c->empty() && std::find(out.begin(), out.end(), *c) == out.end())
                out.push_back(*c);
    }
    return out;
}

std::string try_describe(const SampleRecord& r)
{
    try {
        if (r.manipulation == Manipulation::multi_edit)
            return describe_multi(r.edit_sequence);
        if (r.edit_sequence.size() == 1)
            return describe(r.edit_sequence.front());
    } catch (const Error&) {
    }
    return r.description;
}

} // namespace

std::vector<EditDescriptor> parse_edit_list(const std::string& text)
{
    std::vector<EditDescriptor> out;
    for (const auto& raw : split(text, ';')) {
        const auto item = trim(raw);
        if (item.empty())
            continue;
        const auto colon = item.find(':');
        EditDescriptor e;
        e.manipulation = parse_manipulation(trim(item.substr(0, colon)));
        if (colon != std::string::npos) {
            const auto rest = item.substr(colon + 1);
            const auto gt = rest.find('>');
            e.orig_class = trim(rest.substr(0, gt));
            if (gt != std::string::npos)
                e.repl_class = trim(rest.substr(gt + 1));
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<ManifestEntry> parse_manifest(const std::string& text, const fs::path& base_dir)
{
    std::vector<std::string> columns = {"original", "tampered", "guide_mask"};
    bool named = false;
    std::vector<ManifestEntry> out;
    std::map<std::string, int> id_uses;

    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (trim(line).empty())
            continue;
        if (line[0] == '#') {
            if (first_content) {
                auto header = split(line.substr(1), '\t');
                for (auto& h : header)
                    h = trim(h);
                if (!header.empty() && kColumns.count(header.front())) {
                    for (const auto& h : header)
                        if (!kColumns.count(h))
                            throw Error(Errc::manifest_parse_error, "unknown column '" + h + "'");
                    if (std::find(header.begin(), header.end(), "original") == header.end()
                        || std::find(header.begin(), header.end(), "tampered") == header.end())
                        throw Error(Errc::manifest_parse_error, "header lacks original/tampered");
                    columns = header;
                    named = true;
                    first_content = false;
                }
            }
            continue;
        }
        first_content = false;

        const auto fields = split(line, '\t');
        if (fields.size() < 2 || fields.size() > columns.size() || (named && fields.size() != columns.size()))
            throw Error(Errc::manifest_parse_error,
                        "line " + std::to_string(lineno) + ": expected "
                            + (named ? std::to_string(columns.size()) : std::string("2 or 3"))
                            + " tab-separated fields, got " + std::to_string(fields.size()));

        ManifestEntry e;
        std::string id;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            const auto v = trim(fields[i]);
            const auto& col = columns[i];
            const bool blank = v.empty() || v == "-";
            if (col == "original" || col == "tampered") {
                if (blank)
                    throw Error(Errc::manifest_parse_error,
                                "line " + std::to_string(lineno) + ": empty " + col + " path");
                (col == "original" ? e.original : e.tampered) = resolve(base_dir, v);
            } else if (blank) {
                continue;
            } else if (col == "guide_mask") {
                e.guide_mask = resolve(base_dir, v);
            } else if (col == "id") {
                id = v;
            } else if (col == "manipulation") {
                try {
                    e.manipulation = parse_manipulation(v);
                } catch (const Error& err) {
                    throw Error(Errc::manifest_parse_error, "line " + std::to_string(lineno) + ": " + err.what());
                }
            } else if (col == "labels") {
                for (const auto& l : split(v, ','))
                    if (!trim(l).empty())
                        e.labels.push_back(trim(l));
            } else if (col == "vlm_fidelity") {
                e.vlm_fidelity = parse_int_field(col, v, lineno);
            } else if (col == "human_realism") {
                e.human_realism = parse_int_field(col, v, lineno);
            } else if (col == "generator") {
                e.generator = v;
            } else if (col == "edits") {
                try {
                    e.edits = parse_edit_list(v);
                } catch (const Error& err) {
                    throw Error(Errc::manifest_parse_error, "line " + std::to_string(lineno) + ": " + err.what());
                }
            }
        }
        if (!e.manipulation && !e.edits.empty())
            e.manipulation = e.edits.size() > 1 ? Manipulation::multi_edit : e.edits.front().manipulation;

        if (!id.empty()) {
            e.id = sanitize_id(id);
        } else {
            const std::string base = sanitize_id(e.tampered.stem().string());
            const int n = ++id_uses[base];
            e.id = n == 1 ? base : base + "_" + std::to_string(n);
        }
        out.push_back(std::move(e));
    }

    // explicit ids must be unique, and a derived id such as x_2 may collide with one
    std::set<std::string> seen;
    for (const auto& e : out)
        if (!seen.insert(e.id).second)
            throw Error(Errc::manifest_parse_error, "duplicate id '" + e.id + "'");
    return out;
}

std::vector<ManifestEntry> load_manifest(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::io_error, "cannot open manifest " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), fs::absolute(path).parent_path());
}

PairOutcome label_pair(const ManifestEntry& entry, const PipelineConfig& cfg)
{
    bool rectified = false;
    auto [orig, aligned] = aligned_pair(entry, cfg, rectified);

    PairOutcome out;
    out.artifacts = LabelArtifacts::build(diff_map(orig, aligned, cfg.reduction), cfg.tau);

    std::optional<BinaryLabel> guide;
    if (entry.guide_mask) {
        guide = load_mask(*entry.guide_mask);
        if (!same_shape(*guide, out.artifacts.label))
            throw Error(Errc::shape_mismatch, "guide mask size differs from the original image");
    }

    SampleRecord r;
    r.id = entry.id;
    r.paths.original = entry.original.string();
    r.paths.tampered = entry.tampered.string();
    r.paths.diff_map = "diff/" + entry.id + ".png";
    r.paths.pixel_label = "label/" + entry.id + ".png";
    if (entry.guide_mask)
        r.paths.guide_mask = entry.guide_mask->string();
    r.manipulation = entry.manipulation;
    r.edit_sequence = entry.edits;
    if (r.edit_sequence.empty() && entry.manipulation && *entry.manipulation != Manipulation::multi_edit) {
        EditDescriptor e;
        e.manipulation = *entry.manipulation;
        if (!entry.labels.empty() && e.manipulation != Manipulation::background_change)
            e.orig_class = entry.labels[0];
        if (e.manipulation == Manipulation::inter_class_replacement && entry.labels.size() > 1)
            e.repl_class = entry.labels[1];
        r.edit_sequence.push_back(std::move(e));
    }
    r.semantic_labels = entry.labels.empty() ? classes_of(r.edit_sequence) : entry.labels;
    r.vlm_fidelity = entry.vlm_fidelity;
    r.human_realism = entry.human_realism;
    r.generator = entry.generator;
    r.rectified = rectified;
    r.description = try_describe(r);

    std::optional<ConcentrationScores> scores;
    if (out.artifacts.tampered_size > 0)
        scores = concentration_scores(out.artifacts.label, cfg.concentration);
    out.record = run_filter_chain(std::move(r), out.artifacts, guide ? &*guide : nullptr, scores,
                                  cfg.filters);
    out.record.validate();
    return out;
}

LabelSummary run_label(const std::vector<ManifestEntry>& entries, const PipelineConfig& cfg,
                       const fs::path& out_dir, bool force)
{
    cfg.validate();
    for (const char* sub : {"diff", "label", "meta"})
        fs::create_directories(out_dir / sub);

    LabelSummary summary;
    std::vector<std::optional<SampleRecord>> results(entries.size());
    std::vector<std::string> errors(entries.size());
    std::vector<char> skipped(entries.size(), 0);

    parallel_for(entries.size(), cfg.workers, [&](std::size_t i) {
        const auto& e = entries[i];
        const auto diff_path = out_dir / "diff" / (e.id + ".png");
        const auto label_path = out_dir / "label" / (e.id + ".png");
        const auto meta_path = out_dir / "meta" / (e.id + ".json");
        try {
            if (!force && fs::exists(diff_path) && fs::exists(label_path) && fs::exists(meta_path)) {
                try {
                    results[i] = record_from_json(read_json_file(meta_path));
                    skipped[i] = 1;
                    return;
                } catch (const Error&) {
                    // unreadable metadata from an interrupted run: redo the pair
                }
            }
            auto outcome = label_pair(e, cfg);
            save_diff_map(outcome.artifacts.diff, diff_path);
            save_mask(outcome.artifacts.label, label_path);
            const auto text = to_json(outcome.record).dump(2) + "\n";
            // metadata last: its presence marks the pair complete
            write_file_atomic(meta_path, Bytes(text.begin(), text.end()));
            results[i] = std::move(outcome.record);
        } catch (const std::exception& ex) {
            errors[i] = e.id + ": " + ex.what();
        }
    });

    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!errors[i].empty()) {
            summary.errors.push_back(errors[i]);
            continue;
        }
        (skipped[i] ? summary.skipped : summary.processed) += 1;
        summary.records.push_back(std::move(*results[i]));
    }
    std::sort(summary.records.begin(), summary.records.end(),
              [](const SampleRecord& a, const SampleRecord& b) { return a.id < b.id; });

    summary.records_path = out_dir / "records.jsonl";
    const auto text = serialize_records(summary.records);
    if (!same_bytes(summary.records_path, text))
        write_file_atomic(summary.records_path, Bytes(text.begin(), text.end()));
    return summary;
}

SweepResult run_sweep_tau(const std::vector<ManifestEntry>& entries, const std::vector<double>& taus,
                          const PipelineConfig& cfg)
{
    if (taus.empty())
        throw Error(Errc::invalid_argument, "no tau values given");
    for (std::size_t i = 0; i < taus.size(); ++i) {
        if (!(taus[i] >= 0 && taus[i] <= 1))
            throw Error(Errc::invalid_argument, "tau values must lie in [0,1]");
        if (i > 0 && !(taus[i - 1] <= taus[i]))
            throw Error(Errc::invalid_argument, "tau values must be sorted ascending");
    }

    std::vector<std::optional<std::vector<std::int64_t>>> per_pair(entries.size());
    std::vector<std::string> errors(entries.size());
    parallel_for(entries.size(), cfg.workers, [&](std::size_t i) {
        try {
            bool rectified = false;
            const auto [orig, aligned] = aligned_pair(entries[i], cfg, rectified);
            const FloatMap d = diff_map(orig, aligned, cfg.reduction);
            std::vector<std::int64_t> sizes;
            for (double t : taus)
                sizes.push_back(static_cast<std::int64_t>(threshold_label(d, t).count()));
            per_pair[i] = std::move(sizes);
        } catch (const std::exception& ex) {
            errors[i] = entries[i].id + ": " + ex.what();
        }
    });

    SweepResult out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!errors[i].empty())
            out.errors.push_back(errors[i]);
        else {
            out.ids.push_back(entries[i].id);
            out.sizes.push_back(std::move(*per_pair[i]));
        }
    }
    for (std::size_t k = 0; k < taus.size(); ++k) {
        TauRow row;
        row.tau = taus[k];
        row.pairs = out.sizes.size();
        std::vector<std::int64_t> col;
        for (const auto& s : out.sizes) {
            col.push_back(s[k]);
            ++row.bucket_counts[static_cast<std::size_t>(size_bucket(s[k]))];
        }
        if (!col.empty()) {
            std::sort(col.begin(), col.end());
            row.min_size = col.front();
            row.max_size = col.back();
            double sum = 0;
            for (auto v : col)
                sum += double(v);
            row.mean_size = sum / double(col.size());
            const std::size_t m = col.size() / 2;
            row.median_size = col.size() % 2 ? double(col[m]) : (double(col[m - 1]) + double(col[m])) / 2.0;
        }
        out.rows.push_back(row);
    }
    return out;
}

std::string format_sweep(const SweepResult& sweep)
{
    std::ostringstream os;
    os << "tau\tpairs\tmin\tmedian\tmean\tmax\tsmall\tmedium\tlarge\n";
    for (const auto& r : sweep.rows) {
        os << r.tau << '\t' << r.pairs << '\t' << r.min_size << '\t' << r.median_size << '\t'
           << r.mean_size << '\t' << r.max_size << '\t' << r.bucket_counts[0] << '\t'
           << r.bucket_counts[1] << '\t' << r.bucket_counts[2] << '\n';
    }
    return os.str();
}

EvalReport run_eval(const fs::path& pred_dir, const fs::path& records_path, bool include_rejected)
{
    const auto records = read_records(records_path);

    EvalReport report;
    std::vector<ConfusionCounts> counts;
    std::vector<FloatMap> probs;
    std::vector<BinaryLabel> gts;
    std::vector<std::vector<double>> scores;
    std::vector<std::vector<std::size_t>> gt_sets;

    for (const auto& r : records) {
        if (!include_rejected && !r.retained())
            continue;
        const auto pred_path = pred_dir / (r.id + ".png");
        if (!fs::exists(pred_path)) {
            report.missing.push_back(r.id);
            continue;
        }
        BinaryLabel gt = load_mask(resolve_record_path(records_path, r.paths.pixel_label));
        FloatMap prob = load_image(pred_path).channel(0);
        if (!same_shape(prob, gt))
            throw Error(Errc::shape_mismatch, "prediction for " + r.id + " differs in size from its label");
        counts.push_back(confusion(BinaryLabel(prob >= 0.5), gt));
        probs.push_back(std::move(prob));
        gts.push_back(std::move(gt));

        const auto score_path = pred_dir / (r.id + ".scores.json");
        if (fs::exists(score_path)) {
            const auto j = read_json_file(score_path);
            std::vector<std::string> classes;
            std::vector<double> s;
            try {
                classes = j.at("classes").get<std::vector<std::string>>();
                s = j.at("scores").get<std::vector<double>>();
            } catch (const json::exception& e) {
                throw Error(Errc::schema_violation, score_path.string() + ": " + e.what());
            }
            if (classes.size() != s.size())
                throw Error(Errc::schema_violation, score_path.string() + ": classes and scores differ in length");
            std::vector<std::size_t> gt_idx;
            for (const auto& label : r.semantic_labels) {
                const auto it = std::find(classes.begin(), classes.end(), label);
                if (it != classes.end())
                    gt_idx.push_back(static_cast<std::size_t>(it - classes.begin()));
            }
            // labels outside the vocabulary can never be hit
            if (gt_idx.empty())
                gt_idx.push_back(classes.size());
            scores.push_back(std::move(s));
            gt_sets.push_back(std::move(gt_idx));
        }
    }

    report.n_samples = counts.size();
    report.n_semantic = scores.size();
    const auto pooled = std::accumulate(counts.begin(), counts.end(), ConfusionCounts{});
    report.recall = recall(pooled);
    report.precision = precision(pooled);
    report.f1 = f1(pooled);
    report.iou = iou_dataset(counts);
    report.g_iou = g_iou(counts);
    if (!probs.empty()) {
        try {
            report.auc = auc(probs, gts);
        } catch (const Error& e) {
            if (e.code() != Errc::degenerate_ground_truth)
                throw;
        }
    }
    if (!scores.empty()) {
        report.top1_acc = topk_accuracy(scores, gt_sets, 1);
        report.top5_acc = topk_accuracy(scores, gt_sets, 5);
    }
    return report;
}

std::vector<SampleRecord> fill_descriptions(std::vector<SampleRecord> records)
{
    for (auto& r : records)
        r.description = try_describe(r);
    return records;
}

namespace {

Vec<double> vec_from(const json& j, const char* key)
{
    const auto v = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const Vec<double>>(v.data(), Index(v.size()));
}

FloatMap plane_from(const json& j, const char* key)
{
    const auto rows = j.at(key).get<std::vector<std::vector<double>>>();
    if (rows.empty())
        return FloatMap();
    FloatMap out(Index(rows.size()), Index(rows[0].size()));
    for (std::size_t y = 0; y < rows.size(); ++y) {
        if (rows[y].size() != rows[0].size())
            throw Error(Errc::shape_mismatch, std::string(key) + ": ragged rows");
        for (std::size_t x = 0; x < rows[y].size(); ++x)
            out(Index(y), Index(x)) = rows[y][x];
    }
    return out;
}

ordered_json output_json(const LossOutput<double>& o)
{
    ordered_json j;
    j["value"] = o.value;
    j["gradient"] = std::vector<double>(o.gradient.data(), o.gradient.data() + o.gradient.size());
    return j;
}

} // namespace

ordered_json evaluate_losses(const json& input)
{
    ordered_json out;
    LossParts parts;
    int present = 0;
    try {
        if (input.contains("sem")) {
            const auto& s = input["sem"];
            const auto o = loss_sem(vec_from(s, "logits"), vec_from(s, "targets"));
            parts.sem = o.value;
            out["sem"] = output_json(o);
            ++present;
        }
        if (input.contains("bce")) {
            const auto& s = input["bce"];
            const auto o = loss_bce_pixel(plane_from(s, "prob"), BinaryLabel(plane_from(s, "label") > 0.5));
            parts.bce = o.value;
            out["bce"] = output_json(o);
            ++present;
        }
        if (input.contains("dice")) {
            const auto& s = input["dice"];
            const double eps = s.value("eps", kDiceEpsilon);
            const auto o = loss_dice(plane_from(s, "prob"), BinaryLabel(plane_from(s, "label") > 0.5), eps);
            parts.dice = o.value;
            out["dice"] = output_json(o);
            ++present;
        }
        if (input.contains("cls")) {
            const auto& s = input["cls"];
            const auto o = loss_cls(vec_from(s, "logits"), vec_from(s, "target"));
            parts.cls = o.value;
            out["cls"] = output_json(o);
            ++present;
        }
        if (input.contains("text")) {
            const auto& s = input["text"];
            const FloatMap logits = plane_from(s, "logits");
            const auto targets = s.at("targets").get<std::vector<std::int64_t>>();
            const auto o = loss_text(RowMatrix<double>(logits), targets);
            parts.text = o.value;
            out["text"] = output_json(o);
            ++present;
        }
        if (present == 5) {
            LossWeights w;
            if (input.contains("weights")) {
                const auto& wj = input["weights"];
                w.sem = wj.value("sem", w.sem);
                w.bce = wj.value("bce", w.bce);
                w.dice = wj.value("dice", w.dice);
                w.text = wj.value("text", w.text);
                w.cls = wj.value("cls", w.cls);
            }
            out["total"] = loss_total(parts, w);
        }
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, e.what());
    }
    return out;
}

} // namespace tamperlab
