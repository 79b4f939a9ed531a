// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mscan/data.hpp"
#include "test_util.hpp"

namespace mscan {
namespace {

using testing::rec;
namespace fs = std::filesystem;

fs::path temp_file(const std::string& name, const std::string& body) {
    const fs::path dir = fs::temp_directory_path() / "mscan_data_test";
    fs::create_directories(dir);
    const fs::path p = dir / name;
    std::ofstream(p, std::ios::binary) << body;
    return p;
}

TEST(Ingest, ThreeRowsGetDenseIds) {
    const auto p = temp_file("three.csv",
                             "user_id,item_id,scenario_id,timestamp,click\n"
                             "100,7,3,5,1\n"
                             "200,7,9,6,0\n"
                             "100,8,3,7,1\n");
    const InteractionLog log = ingest_csv(p.string());
    ASSERT_EQ(log.records.size(), 3u);
    EXPECT_EQ(log.records[0], rec(0, 0, 0, 5, 1));
    EXPECT_EQ(log.records[1], rec(1, 0, 1, 6, 0));
    EXPECT_EQ(log.records[2], rec(0, 1, 0, 7, 1));
    EXPECT_EQ(log.users.raw(1), 200);
    EXPECT_EQ((log.vocab_sizes()), (VocabSizes{2, 2, 2}));
}

TEST(Ingest, ColumnsResolvedByNameAndInterestOptional) {
    const auto p = temp_file("reordered.csv",
                             "click,timestamp,interest,scenario_id,item_id,user_id\n"
                             "1,4,0.25,0,1,2\n");
    const InteractionLog log = ingest_csv(p.string());
    ASSERT_EQ(log.records.size(), 1u);
    EXPECT_EQ(log.records[0].timestamp, 4);
    EXPECT_EQ(log.records[0].click, 1);
    EXPECT_EQ(log.records[0].interest, 0.25);
}

TEST(Ingest, ClickOutsideBinaryNamesLine) {
    const auto p = temp_file("bad_click.csv",
                             "user_id,item_id,scenario_id,timestamp,click\n"
                             "1,1,1,1,0\n"
                             "1,2,1,2,2\n");
    try {
        ingest_csv(p.string());
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Ingest, MalformedInputs) {
    EXPECT_THROW(ingest_csv(temp_file("no_col.csv", "user_id,item_id,timestamp,click\n1,1,1,1\n").string()),
                 ParseError);
    EXPECT_THROW(ingest_csv(temp_file("empty.csv", "").string()), ParseError);
    EXPECT_THROW(ingest_csv(temp_file("short.csv", "user_id,item_id,scenario_id,timestamp,click\n1,1,1\n").string()),
                 ParseError);
    EXPECT_THROW(ingest_csv(temp_file("nan.csv", "user_id,item_id,scenario_id,timestamp,click\n1,x,1,1,0\n").string()),
                 ParseError);
    EXPECT_THROW(ingest_csv("/nonexistent/mscan.csv"), MissingInputError);
}

TEST(Ingest, IdenticalFilesGiveIdenticalLogs) {
    const std::string body = "user_id,item_id,scenario_id,timestamp,click\n5,9,1,3,1\n6,9,2,1,0\n5,4,2,2,1\n";
    const InteractionLog a = ingest_csv(temp_file("a.csv", body).string());
    const InteractionLog b = ingest_csv(temp_file("b.csv", body).string());
    EXPECT_EQ(a.records, b.records);
    EXPECT_EQ(a.users, b.users);
    EXPECT_EQ(a.items, b.items);
    EXPECT_EQ(a.scenarios, b.scenarios);
}

TEST(Ingest, ExportedRecordsReadBackUnchanged) {
    // ids already in first-appearance order, so re-densifying is the identity
    std::vector<InteractionRecord> records{rec(0, 0, 0, 0, 1), rec(1, 1, 1, 1, 0), rec(0, 2, 1, 2, 1)};
    records[0].interest = 0.1;
    records[1].interest = 1.0 / 3.0;
    records[2].interest = 0.9;
    const fs::path p = fs::temp_directory_path() / "mscan_data_test" / "export.csv";
    write_interactions_csv(p.string(), records);
    EXPECT_EQ(ingest_csv(p.string()).records, records);
}

TEST(Ingest, DensifyMatchesWriteThenIngest) {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::size_t> id(0, 40);
    std::vector<InteractionRecord> records;
    for (int k = 0; k < 200; ++k) records.push_back(rec(id(rng), id(rng), id(rng) % 5, k, k % 3 == 0 ? 1 : 0));
    const fs::path p = fs::temp_directory_path() / "mscan_data_test" / "densify.csv";
    write_interactions_csv(p.string(), records);
    const InteractionLog read = ingest_csv(p.string());
    const InteractionLog mem = densify(records);
    EXPECT_EQ(mem.records, read.records);
    EXPECT_EQ(mem.users, read.users);
    EXPECT_EQ(mem.items, read.items);
    EXPECT_EQ(mem.scenarios, read.scenarios);
}

TEST(Filter, KeepsOnlyMultiScenarioUsers) {
    const std::vector<InteractionRecord> in{rec(0, 0, 1, 0, 1), rec(1, 0, 1, 1, 1), rec(0, 1, 2, 2, 0)};
    const auto out = filter_multi_scenario_users(in);
    EXPECT_EQ(out, (std::vector<InteractionRecord>{in[0], in[2]}));
}

TEST(Filter, NoOpWhenEveryoneSpansScenarios) {
    const std::vector<InteractionRecord> in{rec(0, 0, 0, 0, 1), rec(0, 1, 1, 1, 0), rec(1, 0, 1, 2, 1),
                                            rec(1, 0, 0, 3, 1)};
    EXPECT_EQ(filter_multi_scenario_users(in), in);
}

TEST(Filter, ErrorsWhenEmptied) {
    EXPECT_THROW(filter_multi_scenario_users({rec(0, 0, 0, 0, 1), rec(1, 0, 1, 1, 1)}), PreconditionError);
    EXPECT_THROW(filter_multi_scenario_users({}), PreconditionError);
}

TEST(Split, TenRecordsFortyPercent) {
    std::vector<InteractionRecord> in;
    for (int t = 0; t < 10; ++t) in.push_back(rec(0, 0, 0, 9 - t, 1));
    const auto s = chronological_split(in, 0.4);
    ASSERT_EQ(s.train.size(), 6u);
    ASSERT_EQ(s.test.size(), 4u);
    for (int k = 0; k < 4; ++k) EXPECT_EQ(s.test[k].timestamp, 6 + k);
}

TEST(Split, HalfOfTwoPutsLaterInTest) {
    const auto s = chronological_split(std::vector{rec(0, 0, 0, 8, 1), rec(0, 1, 0, 3, 0)}, 0.5);
    ASSERT_EQ(s.train.size(), 1u);
    EXPECT_EQ(s.train[0].timestamp, 3);
    EXPECT_EQ(s.test[0].timestamp, 8);
}

TEST(Split, TiesKeepOriginalOrder) {
    const auto s = chronological_split(std::vector{rec(0, 0, 0, 1, 1), rec(0, 1, 0, 1, 1), rec(0, 2, 0, 1, 1)}, 0.4);
    ASSERT_EQ(s.test.size(), 2u);
    EXPECT_EQ(s.train[0].item_id, 0u);
    EXPECT_EQ(s.test[0].item_id, 1u);
    EXPECT_EQ(s.test[1].item_id, 2u);
}

TEST(Split, Errors) {
    EXPECT_THROW(chronological_split(std::vector<InteractionRecord>{}, 0.4), PreconditionError);
    EXPECT_THROW(chronological_split(std::vector{rec(0, 0, 0, 0, 1)}, 0.0), PreconditionError);
    EXPECT_THROW(chronological_split(std::vector{rec(0, 0, 0, 0, 1)}, 1.0), PreconditionError);
}

TEST(SplitProperty, TestSizeIsCeilingAndOrderHolds) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> ts(0, 50);
    for (std::size_t n = 1; n <= 300; ++n) {
        std::vector<InteractionRecord> in;
        for (std::size_t k = 0; k < n; ++k) in.push_back(rec(k % 7, k, k % 3, ts(rng), static_cast<int>(k % 2)));
        const auto s = chronological_split(in, 0.4);
        // exact ceil(2n/5) in integers
        EXPECT_EQ(s.test.size(), (2 * n + 4) / 5) << "n=" << n;
        EXPECT_EQ(s.train.size() + s.test.size(), n);
        if (!s.train.empty()) {
            std::int64_t max_train = 0, min_test = 1 << 30;
            for (const auto& r : s.train) max_train = std::max(max_train, r.timestamp);
            for (const auto& r : s.test) min_test = std::min(min_test, r.timestamp);
            EXPECT_LE(max_train, min_test);
        }
    }
}

TEST(Sequences, FirstRecordIsColdStart) {
    const auto ex = build_sequences({rec(0, 3, 1, 5, 1), rec(0, 4, 1, 6, 0)}, {});
    EXPECT_EQ(ex[0].sequences.mixed_length(), 0u);
    EXPECT_EQ(ex[0].sequences.current_length(), 0u);
    EXPECT_EQ(ex[1].sequences.mixed, (std::vector<HistoryEvent>{{3, 1}}));
    EXPECT_EQ(ex[1].sequences.current, (std::vector<std::size_t>{3}));
}

// Ten prior clicks: seven in scenario 2 at t = 0,1,3,4,6,8,9 and three in
// scenario 1 at t = 2,5,7. Item ids equal 100 + t. Target at t = 10 in
// scenario 2 with caps (5, 5): the five most recent clicks are t = 5..9, of
// which t = 6, 8, 9 are in scenario 2.
TEST(Sequences, HandTracedTenEventLog) {
    std::vector<InteractionRecord> log;
    for (int t = 0; t < 10; ++t) {
        const bool s1 = t == 2 || t == 5 || t == 7;
        log.push_back(rec(0, 100 + t, s1 ? 1 : 2, t, 1));
    }
    log.push_back(rec(1, 999, 2, 4, 1));  // another user's click never leaks in
    log.push_back(rec(0, 200, 2, 10, 0));
    const auto ex = build_sequences(log, {5, 5});
    const Example& target = ex.back();
    EXPECT_EQ(target.sequences.mixed_length(), 5u);
    EXPECT_EQ(target.sequences.mixed,
              (std::vector<HistoryEvent>{{105, 1}, {106, 2}, {107, 1}, {108, 2}, {109, 2}}));
    EXPECT_EQ(target.sequences.current, (std::vector<std::size_t>{106, 108, 109}));
}

TEST(Sequences, CurrentCapKeepsMostRecent) {
    std::vector<InteractionRecord> log;
    for (int t = 0; t < 6; ++t) log.push_back(rec(0, t, 0, t, 1));
    log.push_back(rec(0, 50, 0, 6, 1));
    const auto ex = build_sequences(log, {10, 2});
    EXPECT_EQ(ex.back().sequences.mixed_length(), 6u);
    EXPECT_EQ(ex.back().sequences.current, (std::vector<std::size_t>{4, 5}));
}

TEST(Sequences, NonClicksAndSameTimestampExcluded) {
    const auto ex = build_sequences({rec(0, 1, 0, 0, 0), rec(0, 2, 0, 1, 1), rec(0, 3, 0, 1, 1)}, {});
    EXPECT_TRUE(ex[1].sequences.mixed.empty());
    EXPECT_TRUE(ex[2].sequences.mixed.empty());
}

TEST(Sequences, ZeroCapIsPreconditionError) {
    EXPECT_THROW(build_sequences({rec(0, 0, 0, 0, 1)}, {0, 1}), PreconditionError);
}

TEST(SequenceProperty, NoLeakageAndCurrentIsFilteredMixed) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> user(0, 9), item(0, 29), scen(0, 2);
    std::uniform_int_distribution<int> ts(0, 200), click(0, 1);
    std::vector<InteractionRecord> log;
    for (int k = 0; k < 2000; ++k) log.push_back(rec(user(rng), item(rng), scen(rng), ts(rng), click(rng)));
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::int64_t>> click_times;  // (user, item) -> times
    for (const auto& r : log) {
        if (r.click) click_times[{r.user_id, r.item_id}].push_back(r.timestamp);
    }
    const SequenceCaps caps{8, 4};
    const auto ex = build_sequences(log, caps);
    ASSERT_EQ(ex.size(), log.size());
    for (const auto& e : ex) {
        ASSERT_LE(e.sequences.mixed_length(), caps.history);
        ASSERT_LE(e.sequences.current_length(), caps.current);
        for (const auto& h : e.sequences.mixed) {
            const auto& times = click_times[{e.user_id, h.item_id}];
            // some click of this item by this user happened strictly earlier
            EXPECT_TRUE(std::any_of(times.begin(), times.end(), [&](std::int64_t t) { return t < e.timestamp; }));
        }
        std::vector<std::size_t> filtered;
        for (const auto& h : e.sequences.mixed) {
            if (h.scenario_id == e.scenario_id) filtered.push_back(h.item_id);
        }
        if (filtered.size() > caps.current) filtered.erase(filtered.begin(), filtered.end() - caps.current);
        EXPECT_EQ(e.sequences.current, filtered);
    }
}

TEST(Prepare, SequencesSeeTrainingClicks) {
    InteractionLog log;
    for (int t = 0; t < 5; ++t) {
        log.records.push_back(rec(log.users.intern(1), log.items.intern(t), log.scenarios.intern(t % 2), t, 1));
    }
    const Dataset d = prepare_dataset(log, {}, 0.4, true);
    ASSERT_EQ(d.train.size(), 3u);
    ASSERT_EQ(d.test.size(), 2u);
    EXPECT_EQ(d.test[1].sequences.mixed_length(), 4u);
    EXPECT_EQ((d.vocab), (VocabSizes{1, 5, 2}));
}

}  // namespace
}  // namespace mscan
