#include "doctest.h"

#include <fstream>
#include <thread>
#include <unistd.h>

#include "tamperlab/codec.hpp"
#include "tamperlab/pipeline.hpp"

using namespace tamperlab;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("tamperlab_pipe_" + tag + "_" + std::to_string(::getpid())))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream out(p);
    out << text;
}

// 200x200 mid-gray image with a 60x60 square at (50, 50) raised by delta.
Image square_image(double delta)
{
    Image img(200, 200, 1, 0.5);
    img.channel(0).block(50, 50, 60, 60).array() += delta;
    return img;
}

constexpr const char* kHeader = "#id\toriginal\ttampered\tmanipulation\tlabels\tvlm_fidelity\thuman_realism\n";

// Writes pairs a, b, c (all with the square edit) and a manifest; returns the manifest path.
fs::path write_corpus(const fs::path& dir)
{
    save_image(square_image(0.0), dir / "orig.png");
    save_image(square_image(0.3), dir / "gen.png");
    std::string m = kHeader;
    m += "a\torig.png\tgen.png\tobject_removal\tcar\t9\t5\n";
    m += "b\torig.png\tgen.png\tcolor_change\tshirt\t10\t4\n";
    m += "c\torig.png\tgen.png\tinter_class_replacement\tchair,sofa\t9\t4\n";
    write_text(dir / "manifest.tsv", m);
    return dir / "manifest.tsv";
}

PipelineConfig no_rectify()
{
    PipelineConfig cfg;
    cfg.rectify = false;
    return cfg;
}

} // namespace

TEST_CASE("positional manifests")
{
    const auto es = parse_manifest("a/o1.png\tb/t1.jpg\n\n# comment\n/abs/o2.png\t/abs/x/t1.png\tm/g.png\n", "/base");
    REQUIRE(es.size() == 2);
    CHECK(es[0].original == fs::path("/base/a/o1.png"));
    CHECK(es[0].tampered == fs::path("/base/b/t1.jpg"));
    CHECK(es[0].id == "t1");
    CHECK_FALSE(es[0].guide_mask.has_value());
    CHECK(es[1].id == "t1_2");
    CHECK(es[1].original == fs::path("/abs/o2.png"));
    CHECK(*es[1].guide_mask == fs::path("/base/m/g.png"));

    const auto code_of = [](const std::string& text) {
        try {
            parse_manifest(text, "/");
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::config_error;
    };
    CHECK(code_of("only-one-field\n") == Errc::manifest_parse_error);
    CHECK(code_of("a\tb\tc\td\n") == Errc::manifest_parse_error);
    CHECK(code_of("#id\toriginal\ttampered\na\to.png\tt1.png\na\to.png\tt2.png\n") == Errc::manifest_parse_error);
    CHECK(code_of("#original\ttampered\tcolour\n") == Errc::manifest_parse_error);
    CHECK(code_of("#original\tmanipulation\n") == Errc::manifest_parse_error);
}

TEST_CASE("named manifest columns")
{
    const std::string text = "#id\toriginal\ttampered\tmanipulation\tlabels\tvlm_fidelity\thuman_realism\tgenerator\tedits\n"
                             "s1\to.png\tt.png\tinter_class_replacement\tchair, sofa\t9\t-\tgen-a\t-\n"
                             "s2\to.png\tt.png\t-\t-\t\t\t-\tobject_removal:car;background_change\n";
    const auto es = parse_manifest(text, "/d");
    REQUIRE(es.size() == 2);
    CHECK(es[0].id == "s1");
    CHECK(es[0].manipulation == Manipulation::inter_class_replacement);
    CHECK(es[0].labels == std::vector<std::string>{"chair", "sofa"});
    CHECK(es[0].vlm_fidelity == 9);
    CHECK_FALSE(es[0].human_realism.has_value());
    CHECK(es[0].generator == "gen-a");
    CHECK(es[1].manipulation == Manipulation::multi_edit);
    REQUIRE(es[1].edits.size() == 2);
    CHECK(es[1].edits[0].orig_class == "car");
    CHECK(es[1].edits[1].manipulation == Manipulation::background_change);
}

TEST_CASE("edit lists")
{
    const auto es = parse_edit_list("object_removal:dog; inter_class_replacement:cat>fox ;");
    REQUIRE(es.size() == 2);
    CHECK(es[0] == EditDescriptor{Manipulation::object_removal, "dog", std::nullopt});
    CHECK(es[1] == EditDescriptor{Manipulation::inter_class_replacement, "cat", std::string("fox")});
    CHECK_THROWS_AS(parse_edit_list("smudge:dog"), Error);
}

TEST_CASE("labeling a pair")
{
    TempDir tmp("pair");
    const auto entries = load_manifest(write_corpus(tmp.path));
    const auto out = label_pair(entries[2], no_rectify());
    CHECK(out.artifacts.tampered_size == 3600);
    CHECK(out.artifacts.label.block(50, 50, 60, 60).all());
    CHECK(out.record.status == RecordStatus::retained);
    CHECK(out.record.semantic_labels == std::vector<std::string>{"chair", "sofa"});
    CHECK(out.record.description == "The chair was replaced with a sofa.");
    CHECK(out.record.size_bucket == SizeBucket::small);
    CHECK(out.record.paths.pixel_label == "label/c.png");
    CHECK_FALSE(out.record.rectified);

    // the rectifier falls back on a flat image and still labels the edit
    const auto rect = label_pair(entries[0], PipelineConfig{});
    CHECK(rect.artifacts.tampered_size == 3600);
    CHECK_FALSE(rect.record.rectified);
}

TEST_CASE("label run writes artifacts and skips finished pairs")
{
    TempDir tmp("run");
    auto entries = load_manifest(write_corpus(tmp.path));
    entries.resize(2);
    auto cfg = no_rectify();
    cfg.workers = 2;
    const auto out = tmp.path / "out";
    const auto first = run_label(entries, cfg, out, false);
    CHECK(first.processed == 2);
    CHECK(first.errors.empty());
    CHECK(read_records(out / "records.jsonl") == first.records);
    for (const char* id : {"a", "b"}) {
        CHECK(fs::exists(out / "diff" / (std::string(id) + ".png")));
        CHECK(load_mask(out / "label" / (std::string(id) + ".png")).count() == 3600);
        CHECK(fs::exists(out / "meta" / (std::string(id) + ".json")));
    }
    const Image diff = load_image(out / "diff" / "a.png");
    CHECK(diff(60, 60) == doctest::Approx(0.3).epsilon(0.01));

    const auto stamp = fs::last_write_time(out / "label" / "a.png");
    const auto rec_stamp = fs::last_write_time(out / "records.jsonl");
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    const auto second = run_label(entries, cfg, out, false);
    CHECK(second.skipped == 2);
    CHECK(second.processed == 0);
    CHECK(second.records == first.records);
    CHECK(fs::last_write_time(out / "label" / "a.png") == stamp);
    CHECK(fs::last_write_time(out / "records.jsonl") == rec_stamp);

    const auto forced = run_label(entries, cfg, out, true);
    CHECK(forced.processed == 2);
    CHECK(fs::last_write_time(out / "label" / "a.png") != stamp);
}

TEST_CASE("per-pair failures do not stop the batch")
{
    TempDir tmp("err");
    write_corpus(tmp.path);
    write_text(tmp.path / "bad.tsv", std::string(kHeader)
                                         + "a\torig.png\tgen.png\tobject_removal\tcar\t9\t5\n"
                                         + "gone\torig.png\tmissing.png\tobject_removal\tcar\t9\t5\n"
                                         + "nolabel\torig.png\tgen.png\tobject_removal\t-\t9\t5\n");
    const auto s = run_label(load_manifest(tmp.path / "bad.tsv"), no_rectify(), tmp.path / "out", false);
    CHECK(s.processed == 1);
    REQUIRE(s.errors.size() == 2);
    CHECK(s.errors[0].rfind("gone:", 0) == 0);
    CHECK(s.errors[1].rfind("nolabel:", 0) == 0);
    CHECK(read_records(tmp.path / "out" / "records.jsonl").size() == 1);
}

TEST_CASE("tau sweep")
{
    TempDir tmp("sweep");
    save_image(square_image(0.0), tmp.path / "o.png");
    save_image(square_image(0.15), tmp.path / "t.png");
    const auto entries = parse_manifest("o.png\to.png\no.png\tt.png\n", tmp.path);
    const auto sweep = run_sweep_tau(entries, {0.05, 0.1, 0.2}, no_rectify());
    REQUIRE(sweep.sizes.size() == 2);
    CHECK(sweep.sizes[0] == std::vector<std::int64_t>{0, 0, 0});
    CHECK(sweep.sizes[1] == std::vector<std::int64_t>{3600, 3600, 0});
    REQUIRE(sweep.rows.size() == 3);
    CHECK(sweep.rows[0].max_size == 3600);
    CHECK(sweep.rows[0].median_size == 1800);
    CHECK(sweep.rows[0].bucket_counts == std::array<std::int64_t, 3>{2, 0, 0});
    for (std::size_t k = 1; k < sweep.rows.size(); ++k)
        CHECK(sweep.rows[k].mean_size <= sweep.rows[k - 1].mean_size);
    const auto table = format_sweep(sweep);
    CHECK(table.rfind("tau\tpairs\t", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 4);

    CHECK_THROWS_AS(run_sweep_tau(entries, {0.2, 0.1}, no_rectify()), Error);
    CHECK_THROWS_AS(run_sweep_tau(entries, {1.5}, no_rectify()), Error);
    CHECK_THROWS_AS(run_sweep_tau(entries, {}, no_rectify()), Error);
}

TEST_CASE("evaluation against labeled records")
{
    TempDir tmp("eval");
    const auto out = tmp.path / "out";
    run_label(load_manifest(write_corpus(tmp.path)), no_rectify(), out, false);
    const auto records = out / "records.jsonl";
    const auto pred = tmp.path / "pred";
    fs::create_directories(pred);

    BinaryLabel truth = BinaryLabel::Constant(200, 200, false);
    truth.block(50, 50, 60, 60).setConstant(true);
    BinaryLabel shifted = BinaryLabel::Constant(200, 200, false);
    shifted.block(50, 80, 60, 60).setConstant(true);

    save_mask(truth, pred / "a.png");
    {
        const auto perfect = run_eval(pred, records, false);
        CHECK(perfect.n_samples == 1);
        CHECK(perfect.missing == std::vector<std::string>{"b", "c"});
        CHECK(perfect.recall == 1.0);
        CHECK(perfect.f1 == 1.0);
        CHECK(perfect.iou == 1.0);
        CHECK(*perfect.auc == doctest::Approx(1.0));
    }

    save_mask(shifted, pred / "b.png");
    save_mask(BinaryLabel::Constant(200, 200, false), pred / "c.png");
    const auto r = run_eval(pred, records, false);
    CHECK(r.n_samples == 3);
    CHECK(r.missing.empty());
    // pooled: tp 5400, fp 1800, fn 5400 over 120000 pixels
    CHECK(r.recall == doctest::Approx(0.5));
    CHECK(r.precision == doctest::Approx(0.75));
    CHECK(r.f1 == doctest::Approx(0.6));
    CHECK(r.iou == doctest::Approx(5400.0 / 12600.0));
    CHECK(r.g_iou == doctest::Approx((1.0 + 1.0 / 3.0) / 3.0).epsilon(1e-6));
    CHECK(*r.auc == doctest::Approx(0.5 * (1.0 + 0.5 - 1800.0 / 109200.0)).epsilon(1e-9));
    CHECK_FALSE(r.top1_acc.has_value());

    write_text(pred / "a.scores.json", R"({"classes": ["car", "shirt", "dog"], "scores": [0.9, 0.05, 0.05]})");
    write_text(pred / "b.scores.json", R"({"classes": ["car", "shirt", "dog"], "scores": [0.9, 0.08, 0.02]})");
    write_text(pred / "c.scores.json", R"({"classes": ["car", "shirt", "dog"], "scores": [0.3, 0.3, 0.4]})");
    const auto sem = run_eval(pred, records, false);
    CHECK(sem.n_semantic == 3);
    CHECK(*sem.top1_acc == doctest::Approx(1.0 / 3.0));
    CHECK(*sem.top5_acc == doctest::Approx(2.0 / 3.0));

    save_mask(BinaryLabel::Constant(10, 10, false), pred / "c.png");
    CHECK_THROWS_AS(run_eval(pred, records, false), Error);
}

TEST_CASE("descriptions are filled idempotently")
{
    SampleRecord r;
    r.id = "x";
    r.manipulation = Manipulation::multi_edit;
    r.edit_sequence = parse_edit_list("object_removal:car;background_change");
    r.semantic_labels = {"car"};
    SampleRecord keep;
    keep.id = "y";
    keep.manipulation = Manipulation::inter_class_replacement;
    keep.edit_sequence = {{Manipulation::inter_class_replacement, "chair", std::nullopt}};
    keep.description = "kept";
    const auto once = fill_descriptions({r, keep});
    CHECK(once[0].description
          == "The car was removed from the image.\nThe background was changed while keeping the foreground unchanged.");
    CHECK(once[1].description == "kept");
    CHECK(fill_descriptions(once) == once);
}

TEST_CASE("loss evaluation from JSON")
{
    const auto in = nlohmann::json::parse(R"({
        "sem": {"logits": [0, 0], "targets": [1, 0]},
        "bce": {"prob": [[0.5, 0.5]], "label": [[1, 0]]},
        "dice": {"prob": [[1, 0]], "label": [[1, 0]]},
        "cls": {"logits": [0, 0], "target": [1, 0]},
        "text": {"logits": [[0, 0, 0, 0]], "targets": [2]}
    })");
    const auto out = evaluate_losses(in);
    const double ln2 = std::log(2.0);
    CHECK(out["sem"]["value"].get<double>() == doctest::Approx(ln2));
    CHECK(out["bce"]["value"].get<double>() == doctest::Approx(ln2));
    CHECK(out["dice"]["value"].get<double>() == doctest::Approx(0.0));
    CHECK(out["cls"]["value"].get<double>() == doctest::Approx(ln2));
    CHECK(out["text"]["value"].get<double>() == doctest::Approx(std::log(4.0)));
    CHECK(out["text"]["gradient"].size() == 4);
    const double total = 0.5 * ln2 + ln2 + 0.0 + 3 * std::log(4.0) + ln2;
    CHECK(out["total"].get<double>() == doctest::Approx(total));

    const auto partial = evaluate_losses(nlohmann::json::parse(R"({"sem": {"logits": [0], "targets": [1]}})"));
    CHECK_FALSE(partial.contains("total"));
    CHECK_THROWS_AS(evaluate_losses(nlohmann::json::parse(R"({"sem": {"logits": [0]}})")), Error);
}
