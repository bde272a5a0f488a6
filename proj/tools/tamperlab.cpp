// tamperlab: build, filter and evaluate pixel-level tamper labels.
//
//   tamperlab label pairs.tsv --out out/
//   tamperlab sweep-tau pairs.tsv --taus 0.02,0.05,0.1,0.2
//   tamperlab eval preds/ out/records.jsonl
//   tamperlab split out/records.jsonl --out test_ids.txt
//   tamperlab describe out/records.jsonl
//   tamperlab serve out/records.jsonl --port 8080
//   tamperlab loss arrays.json
//
// Exit codes: 0 success, 1 usage or configuration error, 2 fatal error.

#include <csignal>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "tamperlab/pipeline.hpp"
#include "tamperlab/review_service.hpp"

namespace fs = std::filesystem;
using namespace tamperlab;

namespace {

struct Globals {
    std::string config;
    std::optional<double> tau;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
    bool force = false;
    std::string out;
};

PipelineConfig make_config(const Globals& g)
{
    PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
    if (g.tau)
        cfg.tau = *g.tau;
    if (g.workers)
        cfg.workers = *g.workers;
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.rectify_cfg.seed = *g.seed;
    }
    cfg.validate();
    return cfg;
}

std::vector<SampleRecord> retained_only(const std::vector<SampleRecord>& records)
{
    std::vector<SampleRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [](const SampleRecord& r) { return r.retained(); });
    return out;
}

int cmd_label(const Globals& g, const std::string& manifest)
{
    const auto cfg = make_config(g);
    const fs::path out = g.out.empty() ? fs::path("out") : fs::path(g.out);
    const auto entries = load_manifest(manifest);
    const auto summary = run_label(entries, cfg, out, g.force);

    std::size_t retained = 0, rejected = 0, pending = 0;
    for (const auto& r : summary.records) {
        retained += r.status == RecordStatus::retained;
        rejected += r.status == RecordStatus::rejected;
        pending += r.status == RecordStatus::pending_review;
    }
    for (const auto& e : summary.errors)
        std::cerr << "error: " << e << "\n";
    std::cout << "pairs " << entries.size() << ", processed " << summary.processed << ", skipped "
              << summary.skipped << ", errors " << summary.errors.size() << "\n"
              << "retained " << retained << ", rejected " << rejected << ", pending_review "
              << pending << "\n"
              << "records: " << summary.records_path.string() << "\n";
    return 0;
}

int cmd_sweep(const Globals& g, const std::string& manifest, const std::vector<double>& taus,
              bool per_pair)
{
    const auto cfg = make_config(g);
    const auto sweep = run_sweep_tau(load_manifest(manifest), taus, cfg);
    for (const auto& e : sweep.errors)
        std::cerr << "error: " << e << "\n";
    std::cout << format_sweep(sweep);
    if (per_pair) {
        std::cout << "\nid";
        for (double t : taus)
            std::cout << "\t" << t;
        std::cout << "\n";
        for (std::size_t i = 0; i < sweep.ids.size(); ++i) {
            std::cout << sweep.ids[i];
            for (auto s : sweep.sizes[i])
                std::cout << "\t" << s;
            std::cout << "\n";
        }
    }
    return 0;
}

int cmd_eval(const Globals& g, const std::string& pred_dir, const std::string& records,
             bool include_rejected, bool as_json)
{
    const auto report = run_eval(pred_dir, records, include_rejected);
    const auto j = report.to_json();
    if (!g.out.empty()) {
        const auto text = j.dump(2) + "\n";
        write_file_atomic(g.out, Bytes(text.begin(), text.end()));
    }
    if (as_json)
        std::cout << j.dump(2) << "\n";
    else {
        std::cout << report.table();
        std::cout << "samples " << report.n_samples << ", with class scores " << report.n_semantic
                  << ", missing predictions " << report.missing.size() << "\n";
    }
    for (const auto& id : report.missing)
        std::cerr << "missing prediction: " << id << "\n";
    return 0;
}

int cmd_split(const Globals& g, const std::string& records)
{
    const auto cfg = make_config(g);
    const auto result = balanced_split(retained_only(read_records(records)), cfg.split, cfg.seed);
    std::string text;
    for (const auto& id : result.ids)
        text += id + "\n";
    if (g.out.empty())
        std::cout << text;
    else
        write_file_atomic(g.out, Bytes(text.begin(), text.end()));
    std::cerr << "small " << result.bucket_counts[0] << ", medium " << result.bucket_counts[1]
              << ", large " << result.bucket_counts[2] << "\n";
    if (!result.feasible)
        std::cerr << "warning: " << result.diagnostic << "\n";
    return 0;
}

int cmd_describe(const Globals& g, const std::string& records)
{
    const auto filled = fill_descriptions(read_records(records));
    write_records(filled, g.out.empty() ? fs::path(records) : fs::path(g.out));
    return 0;
}

int cmd_serve(const Globals& g, const std::string& records, const std::string& host, int port,
              const std::string& origin)
{
    const auto cfg = make_config(g);

    // route SIGINT/SIGTERM to a waiter thread instead of a handler
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    ReviewStore store(records, cfg.filters);
    ReviewServer server(store, origin);
    const int bound = server.bind(host, port);
    if (bound < 0) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return 2;
    }
    std::cout << "serving " << records << " on http://" << host << ":" << bound << "\n" << std::flush;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    server.listen();
    if (waiter.joinable()) {
        // listen() can also end on its own; wake the waiter
        pthread_kill(waiter.native_handle(), SIGTERM);
        waiter.join();
    }
    store.compact();
    return 0;
}

int cmd_loss(const std::string& input)
{
    const auto bytes = read_file(input);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::schema_violation, e.what());
    }
    std::cout << evaluate_losses(j).dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Pixel-level tamper label construction, filtering and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--tau", g.tau, "difference threshold in (0,1)");
    app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "seed for RANSAC and split sampling");
    app.add_flag("--force", g.force, "recompute pairs whose outputs already exist");
    app.add_option("--out", g.out, "output directory (label) or file (eval, split, describe)");

    std::string manifest, records, pred_dir, input, host = "127.0.0.1", origin = "*";
    std::vector<double> taus = {0.02, 0.05, 0.1, 0.2};
    bool include_rejected = false, as_json = false, per_pair = false;
    int port = 8080;

    auto* label = app.add_subcommand("label", "build diff maps, labels and records from a pair manifest");
    label->add_option("manifest", manifest, "TSV of original, tampered[, guide_mask] paths")->required();

    auto* sweep = app.add_subcommand("sweep-tau", "tampered-size statistics over several thresholds");
    sweep->add_option("manifest", manifest)->required();
    sweep->add_option("--taus", taus, "ascending thresholds")->delimiter(',');
    sweep->add_flag("--per-pair", per_pair, "also print every pair's sizes");

    auto* eval = app.add_subcommand("eval", "score detector outputs against the labels");
    eval->add_option("pred_dir", pred_dir, "directory of <id>.png probability maps")->required();
    eval->add_option("records", records, "records.jsonl")->required();
    eval->add_flag("--include-rejected", include_rejected, "also evaluate non-retained records");
    eval->add_flag("--json", as_json, "print the JSON report instead of the table");

    auto* split = app.add_subcommand("split", "balanced test selection over retained records");
    split->add_option("records", records)->required();

    auto* desc = app.add_subcommand("describe", "fill edit descriptions from the templates");
    desc->add_option("records", records)->required();

    auto* serve = app.add_subcommand("serve", "run the human review service");
    serve->add_option("records", records)->required();
    serve->add_option("--port", port, "0 picks a free port")->check(CLI::Range(0, 65535));
    serve->add_option("--host", host);
    serve->add_option("--cors-origin", origin);

    auto* loss = app.add_subcommand("loss", "evaluate the loss kernels on arrays from a JSON file");
    loss->add_option("input", input)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*label)
            return cmd_label(g, manifest);
        if (*sweep)
            return cmd_sweep(g, manifest, taus, per_pair);
        if (*eval)
            return cmd_eval(g, pred_dir, records, include_rejected, as_json);
        if (*split)
            return cmd_split(g, records);
        if (*desc)
            return cmd_describe(g, records);
        if (*serve)
            return cmd_serve(g, records, host, port, origin);
        if (*loss)
            return cmd_loss(input);
    } catch (const Error& e) {
        std::cerr << "tamperlab: " << e.what() << "\n";
        return e.code() == Errc::config_error ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "tamperlab: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
