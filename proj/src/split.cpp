#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <unordered_map>

#include "tamperlab/curation.hpp"

namespace tamperlab {

namespace {

std::size_t bucket_index(SizeBucket b)
{
    return static_cast<std::size_t>(b);
}

// Keeps a record only while every one of its classes is below the cap.
std::vector<const SampleRecord*> apply_class_cap(const std::vector<const SampleRecord*>& pool,
                                                 std::int64_t cap)
{
    std::unordered_map<std::string, std::int64_t> taken;
    std::vector<const SampleRecord*> out;
    for (const auto* r : pool) {
        const bool fits = std::all_of(r->semantic_labels.begin(), r->semantic_labels.end(),
                                      [&](const std::string& c) { return taken[c] < cap; });
        if (!fits)
            continue;
        for (const auto& c : std::set<std::string>(r->semantic_labels.begin(), r->semantic_labels.end()))
            ++taken[c];
        out.push_back(r);
    }
    return out;
}

std::vector<const SampleRecord*> apply_type_quotas(const std::vector<const SampleRecord*>& pool,
                                                   const std::map<Manipulation, double>& weights,
                                                   SplitResult& result)
{
    std::map<Manipulation, std::int64_t> available;
    for (const auto* r : pool)
        if (r->manipulation)
            ++available[*r->manipulation];

    double wsum = 0.0;
    double scale = std::numeric_limits<double>::infinity();
    for (const auto& [type, w] : weights) {
        if (!(w > 0))
            continue;
        if (available[type] == 0) {
            result.feasible = false;
            result.diagnostic += "no records of type " + to_string(type) + "; ";
            continue;
        }
        wsum += w;
    }
    for (const auto& [type, w] : weights)
        if (w > 0 && available[type] > 0)
            scale = std::min(scale, double(available[type]) / w);
    if (wsum == 0.0)
        return {};

    std::map<Manipulation, std::int64_t> quota;
    for (const auto& [type, w] : weights)
        if (w > 0 && available[type] > 0)
            quota[type] = static_cast<std::int64_t>(std::floor(w * scale + 1e-9));

    std::vector<const SampleRecord*> out;
    for (const auto* r : pool) {
        if (!r->manipulation)
            continue;
        auto it = quota.find(*r->manipulation);
        if (it != quota.end() && it->second > 0) {
            --it->second;
            out.push_back(r);
        }
    }
    return out;
}

} // namespace

SplitResult balanced_split(const std::vector<SampleRecord>& records, const SplitTargets& targets,
                           std::uint64_t seed)
{
    for (double r : targets.size_ratio)
        if (!(r > 0))
            throw Error(Errc::invalid_argument, "size ratio entries must be positive");

    std::vector<const SampleRecord*> pool;
    pool.reserve(records.size());
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (!r.retained())
            throw Error(Errc::invalid_argument, "split input must be retained records: " + r.id);
        if (!seen.insert(r.id).second)
            throw Error(Errc::invalid_argument, "duplicate record id " + r.id);
        pool.push_back(&r);
    }
    // input order must not matter, only the seed
    std::sort(pool.begin(), pool.end(),
              [](const SampleRecord* a, const SampleRecord* b) { return a->id < b->id; });
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);

    SplitResult result;
    if (targets.per_class_cap)
        pool = apply_class_cap(pool, *targets.per_class_cap);
    if (!targets.type_weights.empty())
        pool = apply_type_quotas(pool, targets.type_weights, result);

    std::array<std::vector<const SampleRecord*>, 3> by_bucket;
    for (const auto* r : pool)
        by_bucket[bucket_index(r->size_bucket)].push_back(r);

    // largest k with ratio[b] * k <= available[b] for every populated bucket
    double k = std::numeric_limits<double>::infinity();
    double ratio_sum = 0.0;
    for (std::size_t b = 0; b < 3; ++b) {
        if (by_bucket[b].empty()) {
            result.feasible = false;
            result.diagnostic += "no records in bucket " + to_string(static_cast<SizeBucket>(b)) + "; ";
            continue;
        }
        ratio_sum += targets.size_ratio[b];
        k = std::min(k, double(by_bucket[b].size()) / targets.size_ratio[b]);
    }
    if (ratio_sum == 0.0)
        return result;
    if (targets.total)
        k = std::min(k, double(*targets.total) / ratio_sum);

    for (std::size_t b = 0; b < 3; ++b) {
        if (by_bucket[b].empty())
            continue;
        const auto want = static_cast<std::size_t>(std::floor(targets.size_ratio[b] * k + 1e-9));
        const std::size_t take = std::min(want, by_bucket[b].size());
        for (std::size_t i = 0; i < take; ++i)
            result.ids.push_back(by_bucket[b][i]->id);
        result.bucket_counts[b] = static_cast<std::int64_t>(take);
    }
    std::sort(result.ids.begin(), result.ids.end());
    if (!result.diagnostic.empty())
        result.diagnostic.erase(result.diagnostic.size() - 2);
    return result;
}

} // namespace tamperlab
