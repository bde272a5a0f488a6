#include "tamperlab/review_service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include "httplib.h"
#include "tamperlab/rectify.hpp"

namespace tamperlab {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kHighlight[3] = {1.0, 0.0, 0.0};

ordered_json submission_json(const ScoreSubmission& s)
{
    ordered_json j;
    j["id"] = s.id;
    j["score"] = s.score;
    j["reviewer"] = s.reviewer;
    j["timestamp"] = s.timestamp;
    return j;
}

std::string manipulation_key(const SampleRecord& r)
{
    return r.manipulation ? to_string(*r.manipulation) : std::string("unknown");
}

} // namespace

ordered_json ReviewStats::to_json() const
{
    ordered_json j;
    j["total"] = total;
    j["pending"] = pending;
    j["scored"] = scored;
    j["retained"] = retained;
    ordered_json rates = ordered_json::object();
    for (const auto& [type, rate] : pass_rate_by_type)
        rates[type] = rate ? ordered_json(*rate) : ordered_json();
    j["pass_rate_by_type"] = rates;
    return j;
}

ReviewStore::ReviewStore(fs::path records_path, FilterThresholds thresholds)
    : records_path_(std::move(records_path)), thresholds_(thresholds)
{
    auto snap = std::make_shared<Snapshot>();
    for (auto& r : read_records(records_path_)) {
        const auto id = r.id;
        if (!snap->emplace(id, std::make_shared<const SampleRecord>(std::move(r))).second)
            throw Error(Errc::schema_violation, "duplicate record id " + id);
    }

    std::ifstream log(log_path());
    std::string line;
    while (std::getline(log, line)) {
        ScoreSubmission s;
        try {
            const auto j = json::parse(line);
            s.id = j.at("id").get<std::string>();
            s.score = j.at("score").get<int>();
            s.reviewer = j.value("reviewer", "");
            s.timestamp = j.value("timestamp", "");
        } catch (const json::exception&) {
            // a torn final line was never acknowledged
            continue;
        }
        auto it = snap->find(s.id);
        if (it == snap->end() || s.score < 1 || s.score > 5)
            continue;
        it->second = std::make_shared<const SampleRecord>(apply(*it->second, s));
    }
    snapshot_ = std::move(snap);
    compact();
}

fs::path ReviewStore::log_path() const
{
    return fs::path(records_path_.string() + ".scores.log");
}

fs::path ReviewStore::resolve(const std::string& entry) const
{
    return resolve_record_path(records_path_, entry);
}

std::shared_ptr<const ReviewStore::Snapshot> ReviewStore::snapshot() const
{
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

SampleRecord ReviewStore::apply(const SampleRecord& r, const ScoreSubmission& s) const
{
    SampleRecord out = r;
    out.human_realism = s.score;
    out.reviewer = s.reviewer.empty() ? std::nullopt : std::optional<std::string>(s.reviewer);
    return run_filter_chain(std::move(out), thresholds_);
}

std::vector<SampleRecord> ReviewStore::queue(std::size_t limit) const
{
    std::vector<SampleRecord> out;
    const auto snap = snapshot();
    for (const auto& [id, r] : *snap) {
        if (out.size() >= limit)
            break;
        if (r->status == RecordStatus::pending_review && !r->human_realism)
            out.push_back(*r);
    }
    return out;
}

std::optional<SampleRecord> ReviewStore::find(const std::string& id) const
{
    const auto snap = snapshot();
    const auto it = snap->find(id);
    if (it == snap->end())
        return std::nullopt;
    return *it->second;
}

void ReviewStore::append_log(const ScoreSubmission& s)
{
    const auto line = submission_json(s).dump() + "\n";
    const int fd = ::open(log_path().c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0)
        throw Error(Errc::io_error, "cannot open score log: " + std::string(std::strerror(errno)));
    std::size_t done = 0;
    while (done < line.size()) {
        const auto n = ::write(fd, line.data() + done, line.size() - done);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            ::close(fd);
            throw Error(Errc::io_error, "score log write failed: " + std::string(std::strerror(errno)));
        }
        done += static_cast<std::size_t>(n);
    }
    const bool synced = ::fsync(fd) == 0;
    ::close(fd);
    if (!synced)
        throw Error(Errc::io_error, "score log fsync failed");
}

SampleRecord ReviewStore::submit(const ScoreSubmission& s)
{
    if (s.score < 1 || s.score > 5)
        throw Error(Errc::invalid_argument, "score must be an integer in 1..5");
    std::lock_guard lock(write_mutex_);
    const auto current = snapshot();
    const auto it = current->find(s.id);
    if (it == current->end())
        throw Error(Errc::not_found, "unknown sample " + s.id);

    auto updated = std::make_shared<const SampleRecord>(apply(*it->second, s));
    append_log(s);
    auto next = std::make_shared<Snapshot>(*current);
    (*next)[s.id] = updated;
    {
        std::lock_guard swap(snapshot_mutex_);
        snapshot_ = std::move(next);
    }
    return *updated;
}

void ReviewStore::compact()
{
    std::lock_guard lock(write_mutex_);
    const auto snap = snapshot();
    std::vector<SampleRecord> records;
    records.reserve(snap->size());
    for (const auto& [id, r] : *snap)
        records.push_back(*r);
    write_records(records, records_path_);
    std::error_code ec;
    fs::remove(log_path(), ec);
}

ReviewStats ReviewStore::stats() const
{
    ReviewStats st;
    std::map<std::string, std::pair<std::size_t, std::size_t>> by_type; // scored, retained
    const auto snap = snapshot();
    for (const auto& [id, r] : *snap) {
        ++st.total;
        auto& bucket = by_type[manipulation_key(*r)];
        if (r->status == RecordStatus::pending_review)
            ++st.pending;
        if (r->retained())
            ++st.retained;
        if (r->human_realism) {
            ++st.scored;
            ++bucket.first;
            bucket.second += r->retained();
        }
    }
    for (const auto& [type, c] : by_type)
        st.pass_rate_by_type[type] =
            c.first ? std::optional<double>(double(c.second) / double(c.first)) : std::nullopt;
    return st;
}

Image render_overlay(const Image& tampered, const BinaryLabel& label)
{
    Image base = tampered.channels() == 3 ? tampered : to_rgb(tampered);
    if (base.height() != label.rows() || base.width() != label.cols())
        base = resize_bilinear(base, label.rows(), label.cols());
    std::vector<FloatMap> planes;
    for (int c = 0; c < 3; ++c)
        planes.push_back(label.select(0.5 * base.channel(c) + 0.5 * kHighlight[c], base.channel(c)));
    return Image(std::move(planes));
}

ordered_json review_item_json(const SampleRecord& r)
{
    const std::string base = "/api/sample/" + r.id + "/image/";
    ordered_json j;
    j["id"] = r.id;
    j["original_url"] = base + "original";
    j["tampered_url"] = base + "tampered";
    j["overlay_url"] = base + "overlay";
    j["manipulation"] = r.manipulation ? ordered_json(to_string(*r.manipulation)) : ordered_json();
    j["description"] = r.description;
    j["current_score"] = r.human_realism ? ordered_json(*r.human_realism) : ordered_json();
    j["reviewer"] = r.reviewer ? ordered_json(*r.reviewer) : ordered_json();
    return j;
}

struct ReviewServer::Impl {
    ReviewStore& store;
    httplib::Server server;
    std::string host;
    int port = -1;

    explicit Impl(ReviewStore& s) : store(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message)
{
    ordered_json j;
    j["error"] = message;
    send_json(res, status, j);
}

std::string sniff_content_type(const Bytes& bytes)
{
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
        return "image/jpeg";
    return "image/png";
}

} // namespace

ReviewServer::ReviewServer(ReviewStore& store, std::string cors_origin)
    : impl_(std::make_unique<Impl>(store))
{
    auto& svr = impl_->server;
    svr.set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});

    svr.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    svr.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    });

    svr.Get("/api/queue", [this](const httplib::Request& req, httplib::Response& res) {
        std::size_t limit = 50;
        if (req.has_param("limit")) {
            try {
                const long v = std::stol(req.get_param_value("limit"));
                if (v < 0)
                    throw std::invalid_argument("negative");
                limit = static_cast<std::size_t>(v);
            } catch (const std::exception&) {
                send_error(res, 400, "limit must be a non-negative integer");
                return;
            }
        }
        try {
            ordered_json items = ordered_json::array();
            for (const auto& r : impl_->store.queue(limit))
                items.push_back(review_item_json(r));
            send_json(res, 200, items);
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    });

    svr.Post(R"(/api/sample/([^/]+)/score)", [this](const httplib::Request& req, httplib::Response& res) {
        ScoreSubmission s;
        s.id = req.matches[1];
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            send_error(res, 400, "body must be JSON");
            return;
        }
        if (!body.is_object() || !body.contains("score") || !body["score"].is_number_integer()) {
            send_error(res, 422, "score must be an integer in 1..5");
            return;
        }
        s.score = body["score"].get<int>();
        if (body.contains("reviewer") && body["reviewer"].is_string())
            s.reviewer = body["reviewer"].get<std::string>();
        if (body.contains("timestamp") && body["timestamp"].is_string())
            s.timestamp = body["timestamp"].get<std::string>();
        if (body.contains("id") && body["id"].is_string() && body["id"].get<std::string>() != s.id) {
            send_error(res, 422, "body id does not match the URL");
            return;
        }
        try {
            const auto r = impl_->store.submit(s);
            ordered_json j;
            j["id"] = r.id;
            j["human_realism"] = *r.human_realism;
            j["status"] = to_string(r.status);
            j["retained"] = r.retained();
            send_json(res, 200, j);
        } catch (const Error& e) {
            if (e.code() == Errc::not_found)
                send_error(res, 404, e.what());
            else if (e.code() == Errc::invalid_argument)
                send_error(res, 422, e.what());
            else
                send_error(res, 500, e.what());
        }
    });

    svr.Get(R"(/api/sample/([^/]+)/image/([a-z]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const std::string kind = req.matches[2];
        const auto r = impl_->store.find(id);
        if (!r) {
            send_error(res, 404, "unknown sample " + id);
            return;
        }
        try {
            Bytes bytes;
            if (kind == "original")
                bytes = read_file(impl_->store.resolve(r->paths.original));
            else if (kind == "tampered")
                bytes = read_file(impl_->store.resolve(r->paths.tampered));
            else if (kind == "overlay") {
                const Image tampered = load_image(impl_->store.resolve(r->paths.tampered));
                const BinaryLabel label = load_mask(impl_->store.resolve(r->paths.pixel_label));
                bytes = encode_png8(render_overlay(tampered, label));
            } else {
                send_error(res, 404, "unknown image kind " + kind);
                return;
            }
            res.status = 200;
            res.set_content(std::string(bytes.begin(), bytes.end()), sniff_content_type(bytes));
        } catch (const Error& e) {
            send_error(res, e.code() == Errc::io_error ? 404 : 500, e.what());
        }
    });

    svr.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, impl_->store.stats().to_json());
    });
}

ReviewServer::~ReviewServer()
{
    stop();
}

int ReviewServer::bind(const std::string& host, int port)
{
    impl_->host = host;
    if (port == 0)
        impl_->port = impl_->server.bind_to_any_port(host);
    else
        impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
    return impl_->port;
}

bool ReviewServer::listen()
{
    return impl_->server.listen_after_bind();
}

void ReviewServer::stop()
{
    if (impl_)
        impl_->server.stop();
}

} // namespace tamperlab
