#include <doctest.h>

#include <algorithm>
#include <stdexcept>
#include <set>

#include "fslink/indexing.hpp"
#include "fslink/rng.hpp"
#include "oracles.hpp"

using namespace fslink;

namespace {

RecordStore table_one_records() {
    // the two-file example merged into one store for deduplication
    RecordStore store;
    store.schema = RecordSchema{{{"first"}, {"last"}, {"zip"}}};
    auto add = [&](const char* f, const char* l, const char* z) {
        store.records.push_back({std::string(f), std::string(l), std::string(z)});
    };
    add("Jane", "Calder", "15210");    // 0
    add("Paul", "Frankes", "15232");   // 1
    add("Heather", "Porter", "51236"); // 2
    add("Jane", "Kalder", "15210");    // 3
    add("Heather", "Porter", "15236"); // 4
    return store;
}

BlockingKey last_initial_key() {
    return BlockingKey{{{1, KeyExtractor::Transform::FirstChars, 1}}};
}

BlockingKey zip_key() { return BlockingKey{{{2, KeyExtractor::Transform::Identity, 1}}}; }

std::set<std::pair<std::uint32_t, std::uint32_t>> as_set(
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& v) {
    return {v.begin(), v.end()};
}

RecordStore random_store(Rng& rng, std::size_t n) {
    RecordStore store;
    store.schema = RecordSchema{{{"k1"}, {"k2"}}};
    for (std::size_t i = 0; i < n; ++i) {
        Record rec(2);
        if (rng.uniform() < 0.95) rec[0] = std::string(1, static_cast<char>('A' + rng.bounded(4)));
        rec[1] = std::string(1, static_cast<char>('a' + rng.bounded(3)));
        store.records.push_back(std::move(rec));
    }
    return store;
}

}  // namespace

TEST_CASE("block_pairs on a single shared key") {
    RecordStore store;
    store.schema = RecordSchema{{{"k"}}};
    for (int i = 0; i < 4; ++i) store.records.push_back({std::string("same")});
    auto pairs = block_pairs(store, BlockingKey{{{0, KeyExtractor::Transform::Identity, 1}}});
    CHECK(pairs.size() == 6);  // C(4,2)
    for (const auto& [a, b] : pairs) CHECK(a < b);
}

TEST_CASE("blocking keeps same-key pairs and drops the rest") {
    RecordStore store = table_one_records();
    auto pairs = as_set(block_pairs(store, last_initial_key()));
    CHECK(pairs.count({0, 3}) == 0);  // Calder vs Kalder differ on last initial
    CHECK(pairs.count({2, 4}) == 1);  // Porter/Porter
    auto zip_pairs = as_set(block_pairs(store, zip_key()));
    CHECK(zip_pairs.count({0, 3}) == 1);
    CHECK(zip_pairs.count({2, 4}) == 0);  // transposed zip digits
}

TEST_CASE("absent key fields form no pairs") {
    RecordStore store;
    store.schema = RecordSchema{{{"k"}}};
    store.records.push_back({std::nullopt});
    store.records.push_back({std::nullopt});
    store.records.push_back({std::string("x")});
    auto pairs = block_pairs(store, BlockingKey{{{0, KeyExtractor::Transform::Identity, 1}}});
    CHECK(pairs.empty());
}

TEST_CASE("blocking equals the all-pairs oracle") {
    Rng rng(555);
    for (int trial = 0; trial < 20; ++trial) {
        RecordStore store = random_store(rng, 150);
        BlockingKey key{{{0, KeyExtractor::Transform::Identity, 1},
                         {1, KeyExtractor::Transform::Identity, 1}}};
        auto got = as_set(block_pairs(store, key));
        auto want = as_set(oracles::brute_force_block(store, key));
        CHECK(got == want);
    }
}

TEST_CASE("two-file blocking") {
    RecordStore a, b;
    a.schema = b.schema = RecordSchema{{{"k"}}};
    a.records = {{std::string("x")}, {std::string("y")}};
    b.records = {{std::string("y")}, {std::string("x")}, {std::string("x")}};
    auto pairs = as_set(block_pairs(a, b, BlockingKey{{{0, KeyExtractor::Transform::Identity, 1}}}));
    CHECK(pairs == std::set<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}, {0, 2}, {1, 0}});
}

TEST_CASE("union_passes takes the set union") {
    RecordStore store = table_one_records();
    IndexingPlan plan;
    plan.passes = {zip_key(), last_initial_key()};
    CandidatePairSet set = union_passes(store, plan);

    std::set<std::pair<std::uint32_t, std::uint32_t>> got;
    for (const auto& p : set.pairs) got.insert({p.a, p.b});
    CHECK(got.count({0, 3}) == 1);  // via zip
    CHECK(got.count({2, 4}) == 1);  // via last initial
    CHECK(got.count({0, 4}) == 0);  // Jane vs Heather shares neither key
    CHECK(set.n_blocked == set.pairs.size());

    // no duplicates after the union
    CHECK(got.size() == set.pairs.size());

    // single pass reduces to block_pairs
    IndexingPlan single;
    single.passes = {zip_key()};
    CandidatePairSet only_zip = union_passes(store, single);
    auto direct = block_pairs(store, zip_key());
    CHECK(only_zip.pairs.size() == direct.size());

    // union is order-insensitive
    IndexingPlan swapped;
    swapped.passes = {last_initial_key(), zip_key()};
    CandidatePairSet set2 = union_passes(store, swapped);
    std::set<std::pair<std::uint32_t, std::uint32_t>> got2;
    for (const auto& p : set2.pairs) got2.insert({p.a, p.b});
    CHECK(got == got2);

    // idempotent under a repeated pass
    IndexingPlan doubled;
    doubled.passes = {zip_key(), zip_key()};
    CHECK(union_passes(store, doubled).pairs.size() == direct.size());
}

TEST_CASE("derive_support counts") {
    FilterPredicate min2{FilterPredicate::Kind::MinAgreements, 2};
    CHECK(derive_support(min2, 5).count() == 26);  // 32 - 1 - 5

    FilterPredicate min0{FilterPredicate::Kind::MinAgreements, 0};
    SupportSet full = derive_support(min0, 5);
    CHECK(full.count() == 32);
    CHECK(full.is_full());

    FilterPredicate explicit_set;
    explicit_set.kind = FilterPredicate::Kind::ExplicitPatterns;
    explicit_set.patterns = {pattern_from_string("111")};
    SupportSet single = derive_support(explicit_set, 3);
    CHECK(single.count() == 1);
    CHECK(single.contains(7));

    CHECK_THROWS_AS(derive_support(min2, 25), std::invalid_argument);  // over the cap
    FilterPredicate impossible{FilterPredicate::Kind::MinAgreements, 4};
    CHECK_THROWS_AS(derive_support(impossible, 3), std::invalid_argument);
}

TEST_CASE("log-ratio cutoff reduces to a pattern predicate") {
    // q=2 provisional distributions
    std::vector<double> m = {0.01, 0.09, 0.09, 0.81};
    std::vector<double> u = {0.81, 0.09, 0.09, 0.01};
    FilterPredicate pred;
    pred.kind = FilterPredicate::Kind::LogRatioCutoff;
    pred.m_probs = m;
    pred.u_probs = u;
    pred.cutoff = 0.0;
    SupportSet support = derive_support(pred, 2);
    CHECK_FALSE(support.contains(0));  // ratio 1/81
    CHECK(support.contains(1));        // ratio 1
    CHECK(support.contains(2));
    CHECK(support.contains(3));        // ratio 81
}

TEST_CASE("apply_filter marks exactly the in-support pairs") {
    RecordStore store = table_one_records();
    IndexingPlan plan;
    plan.passes = {zip_key(), last_initial_key()};
    CandidatePairSet set = union_passes(store, plan);
    std::vector<ComparatorSpec> specs{
        {0, ComparatorSpec::Kind::JaroWinklerThreshold, 0.9},
        {1, ComparatorSpec::Kind::JaroWinklerThreshold, 0.9},
        {2, ComparatorSpec::Kind::Exact, 0.0},
    };
    attach_patterns(set, store, specs);

    FilterPredicate pred{FilterPredicate::Kind::MinAgreements, 2};
    apply_filter(set, pred);
    SupportSet support = derive_support(pred, 3);
    std::size_t kept = 0;
    for (const auto& p : set.pairs) {
        CHECK(p.iota == support.contains(p.pattern));
        kept += p.iota ? 1 : 0;
    }
    CHECK(set.n_filtered == kept);
    CHECK(set.excluded_by_filter() == set.n_blocked - kept);

    // no-op filter keeps everything
    CandidatePairSet set2 = union_passes(store, plan);
    attach_patterns(set2, store, specs);
    apply_filter(set2, FilterPredicate{FilterPredicate::Kind::MinAgreements, 0});
    CHECK(set2.n_filtered == set2.n_blocked);
}

TEST_CASE("all-zero patterns are dropped by min-agreements(1)") {
    RecordStore store;
    store.schema = RecordSchema{{{"k"}, {"v"}}};
    store.records = {{std::string("x"), std::string("1")},
                     {std::string("x"), std::string("2")}};
    IndexingPlan plan;
    plan.passes = {BlockingKey{{{0, KeyExtractor::Transform::Identity, 1}}}};
    CandidatePairSet set = union_passes(store, plan);
    std::vector<ComparatorSpec> specs{{1, ComparatorSpec::Kind::Exact, 0.0}};
    attach_patterns(set, store, specs);
    apply_filter(set, FilterPredicate{FilterPredicate::Kind::MinAgreements, 1});
    CHECK(set.n_filtered == 0);
}

TEST_CASE("pairs csv round trip") {
    RecordStore store = table_one_records();
    IndexingPlan plan;
    plan.passes = {zip_key(), last_initial_key()};
    CandidatePairSet set = union_passes(store, plan);
    std::vector<ComparatorSpec> specs{
        {0, ComparatorSpec::Kind::JaroWinklerThreshold, 0.9},
        {1, ComparatorSpec::Kind::JaroWinklerThreshold, 0.9},
        {2, ComparatorSpec::Kind::Exact, 0.0},
    };
    attach_patterns(set, store, specs);
    apply_filter(set, FilterPredicate{FilterPredicate::Kind::MinAgreements, 2});

    write_pairs_csv("fslink_pairs_test.csv", set);
    CandidatePairSet back = read_pairs_csv("fslink_pairs_test.csv", set.q);
    REQUIRE(back.pairs.size() == set.pairs.size());
    for (std::size_t i = 0; i < set.pairs.size(); ++i) {
        CHECK(back.pairs[i].a == set.pairs[i].a);
        CHECK(back.pairs[i].b == set.pairs[i].b);
        CHECK(back.pairs[i].pattern == set.pairs[i].pattern);
        CHECK(back.pairs[i].iota == set.pairs[i].iota);
    }
    CHECK(back.n_filtered == set.n_filtered);
    std::remove("fslink_pairs_test.csv");
}
