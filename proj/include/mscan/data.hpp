// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Interaction logs, vocabularies, chronological splitting and behavior
// sequence construction.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mscan/error.hpp"

namespace mscan {

/// One logged impression.
struct InteractionRecord {
    std::size_t user_id = 0;
    std::size_t item_id = 0;
    std::size_t scenario_id = 0;
    std::int64_t timestamp = 0;
    int click = 0;
    std::optional<double> interest;  // ground truth, synthetic logs only

    friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

struct HistoryEvent {
    std::size_t item_id = 0;
    std::size_t scenario_id = 0;

    friend bool operator==(const HistoryEvent&, const HistoryEvent&) = default;
};

/// Cross-scenario history and its restriction to the example's scenario.
/// Only valid positions are stored; padding is implicit.
struct BehaviorSequences {
    std::vector<HistoryEvent> mixed;    // oldest first, at most history cap
    std::vector<std::size_t> current;   // item ids, oldest first, at most current cap

    std::size_t mixed_length() const { return mixed.size(); }
    std::size_t current_length() const { return current.size(); }
};

struct Example {
    std::size_t user_id = 0;
    std::size_t item_id = 0;
    std::size_t scenario_id = 0;
    std::int64_t timestamp = 0;
    int label = 0;
    BehaviorSequences sequences;
    std::optional<double> ground_truth_interest;
};

struct SequenceCaps {
    std::size_t history = 50;
    std::size_t current = 20;
};

struct VocabSizes {
    std::size_t users = 0;
    std::size_t items = 0;
    std::size_t scenarios = 0;

    friend bool operator==(const VocabSizes&, const VocabSizes&) = default;
};

/// Raw-id to dense-id map; dense ids are assigned in order of first appearance.
class Vocabulary {
public:
    std::size_t intern(std::int64_t raw) {
        auto [it, inserted] = index_.try_emplace(raw, raw_ids_.size());
        if (inserted) raw_ids_.push_back(raw);
        return it->second;
    }

    std::optional<std::size_t> find(std::int64_t raw) const {
        auto it = index_.find(raw);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::int64_t raw(std::size_t dense) const { return raw_ids_.at(dense); }
    std::size_t size() const { return raw_ids_.size(); }
    const std::vector<std::int64_t>& raw_ids() const { return raw_ids_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.raw_ids_ == b.raw_ids_; }

private:
    std::vector<std::int64_t> raw_ids_;
    std::unordered_map<std::int64_t, std::size_t> index_;
};

/// Column names of an interaction CSV.
struct CsvSchema {
    std::string user = "user_id";
    std::string item = "item_id";
    std::string scenario = "scenario_id";
    std::string timestamp = "timestamp";
    std::string click = "click";
    std::string interest = "interest";  // optional column
};

struct InteractionLog {
    std::vector<InteractionRecord> records;
    Vocabulary users;
    Vocabulary items;
    Vocabulary scenarios;

    VocabSizes vocab_sizes() const { return {users.size(), items.size(), scenarios.size()}; }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string_view field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                    : comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
            field.remove_suffix(1);
        }
        out.push_back(field);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::int64_t parse_int(std::string_view field, std::size_t line_no, const std::string& column) {
    std::string s(field);
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": column '" + column + "' is not an integer: '" + s +
                         "'");
    }
    return v;
}

inline double parse_real(std::string_view field, std::size_t line_no, const std::string& column) {
    std::string s(field);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size() || !std::isfinite(v)) {
        throw ParseError("line " + std::to_string(line_no) + ": column '" + column + "' is not a finite real: '" + s +
                         "'");
    }
    return v;
}

}  // namespace detail

/// Reads `user_id,item_id,scenario_id,timestamp,click[,interest]` rows and
/// remaps raw ids to dense ids.
inline InteractionLog ingest_csv(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("ingest_csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("line 1: missing header row in '" + path + "'");
    const auto header = detail::split_fields(line);
    auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (header[k] == name) return k;
        }
        if (required) throw ParseError("line 1: missing column '" + name + "' in '" + path + "'");
        return std::nullopt;
    };
    const std::size_t cu = *column(schema.user, true);
    const std::size_t ci = *column(schema.item, true);
    const std::size_t cs = *column(schema.scenario, true);
    const std::size_t ct = *column(schema.timestamp, true);
    const std::size_t cc = *column(schema.click, true);
    const std::optional<std::size_t> cm = column(schema.interest, false);

    InteractionLog log;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != header.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(fields.size()));
        }
        InteractionRecord r;
        r.user_id = log.users.intern(detail::parse_int(fields[cu], line_no, schema.user));
        r.item_id = log.items.intern(detail::parse_int(fields[ci], line_no, schema.item));
        r.scenario_id = log.scenarios.intern(detail::parse_int(fields[cs], line_no, schema.scenario));
        r.timestamp = detail::parse_int(fields[ct], line_no, schema.timestamp);
        const std::int64_t click = detail::parse_int(fields[cc], line_no, schema.click);
        if (click != 0 && click != 1) {
            throw ParseError("line " + std::to_string(line_no) + ": click must be 0 or 1, got " +
                             std::to_string(click));
        }
        r.click = static_cast<int>(click);
        if (cm) r.interest = detail::parse_real(fields[*cm], line_no, schema.interest);
        log.records.push_back(r);
    }
    return log;
}

/// In-memory equivalent of writing `records` and ingesting the file: ids are
/// reinterned by first appearance, exactly as ingest_csv assigns them.
inline InteractionLog densify(const std::vector<InteractionRecord>& records) {
    InteractionLog log;
    log.records.reserve(records.size());
    for (InteractionRecord r : records) {
        r.user_id = log.users.intern(static_cast<std::int64_t>(r.user_id));
        r.item_id = log.items.intern(static_cast<std::int64_t>(r.item_id));
        r.scenario_id = log.scenarios.intern(static_cast<std::int64_t>(r.scenario_id));
        log.records.push_back(r);
    }
    return log;
}

/// Two-column `raw_id,dense_id` mapping.
inline void write_vocabulary(const std::string& path, const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_vocabulary: cannot write '" + path + "'");
    out << "raw_id,dense_id\n";
    for (std::size_t k = 0; k < vocab.size(); ++k) out << vocab.raw(k) << ',' << k << '\n';
}

/// Writes records with dense ids in the ingestion schema. The interest column
/// is emitted when every record carries one.
inline void write_interactions_csv(const std::string& path, const std::vector<InteractionRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_interactions_csv: cannot write '" + path + "'");
    const bool with_interest =
        !records.empty() && std::all_of(records.begin(), records.end(), [](const auto& r) { return r.interest; });
    out << "user_id,item_id,scenario_id,timestamp,click" << (with_interest ? ",interest" : "") << '\n';
    char buf[32];
    for (const auto& r : records) {
        out << r.user_id << ',' << r.item_id << ',' << r.scenario_id << ',' << r.timestamp << ',' << r.click;
        if (with_interest) {
            std::snprintf(buf, sizeof buf, "%.17g", *r.interest);
            out << ',' << buf;
        }
        out << '\n';
    }
}

/// Keeps only users that appear in at least two distinct scenarios.
inline std::vector<InteractionRecord> filter_multi_scenario_users(const std::vector<InteractionRecord>& records) {
    if (records.empty()) throw PreconditionError("filter_multi_scenario_users: no records");
    std::map<std::size_t, std::set<std::size_t>> seen;
    for (const auto& r : records) seen[r.user_id].insert(r.scenario_id);
    std::vector<InteractionRecord> kept;
    for (const auto& r : records) {
        if (seen[r.user_id].size() >= 2) kept.push_back(r);
    }
    if (kept.empty()) throw PreconditionError("filter_multi_scenario_users: no user spans two scenarios");
    return kept;
}

/// Number of test rows for a split: ceil(fraction * n), tolerant of the
/// representation error in fractions such as 0.4.
inline std::size_t test_count(std::size_t n, double test_fraction) {
    const double x = test_fraction * static_cast<double>(n);
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(x));
}

template <typename T>
struct Split {
    std::vector<T> train;
    std::vector<T> test;
};

/// Stable sort by timestamp; the most recent ceil(fraction * n) rows become
/// the test set.
template <typename T>
Split<T> chronological_split(std::vector<T> rows, double test_fraction) {
    if (rows.empty()) throw PreconditionError("chronological_split: no rows");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw PreconditionError("chronological_split: test_fraction must lie in (0, 1)");
    }
    std::stable_sort(rows.begin(), rows.end(), [](const T& a, const T& b) { return a.timestamp < b.timestamp; });
    const std::size_t n_test = test_count(rows.size(), test_fraction);
    Split<T> out;
    const auto cut = rows.begin() + static_cast<std::ptrdiff_t>(rows.size() - n_test);
    out.train.assign(std::make_move_iterator(rows.begin()), std::make_move_iterator(cut));
    out.test.assign(std::make_move_iterator(cut), std::make_move_iterator(rows.end()));
    return out;
}

/// One Example per record, in record order. Histories hold clicked events of
/// the same user with a strictly earlier timestamp.
inline std::vector<Example> build_sequences(const std::vector<InteractionRecord>& records, SequenceCaps caps) {
    if (caps.history == 0 || caps.current == 0) throw PreconditionError("build_sequences: caps must be positive");

    struct Click {
        std::int64_t timestamp;
        HistoryEvent event;
    };
    std::unordered_map<std::size_t, std::vector<Click>> clicks;
    {
        std::vector<std::size_t> order(records.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return records[a].timestamp < records[b].timestamp; });
        for (std::size_t k : order) {
            const auto& r = records[k];
            if (r.click == 1) clicks[r.user_id].push_back({r.timestamp, {r.item_id, r.scenario_id}});
        }
    }

    std::vector<Example> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        Example e;
        e.user_id = r.user_id;
        e.item_id = r.item_id;
        e.scenario_id = r.scenario_id;
        e.timestamp = r.timestamp;
        e.label = r.click;
        e.ground_truth_interest = r.interest;
        if (auto it = clicks.find(r.user_id); it != clicks.end()) {
            const auto& seq = it->second;
            const auto end = std::lower_bound(seq.begin(), seq.end(), r.timestamp,
                                              [](const Click& c, std::int64_t t) { return c.timestamp < t; });
            const std::size_t available = static_cast<std::size_t>(end - seq.begin());
            const std::size_t take = std::min(available, caps.history);
            e.sequences.mixed.reserve(take);
            for (auto c = end - static_cast<std::ptrdiff_t>(take); c != end; ++c) e.sequences.mixed.push_back(c->event);
            for (const auto& h : e.sequences.mixed) {
                if (h.scenario_id == r.scenario_id) e.sequences.current.push_back(h.item_id);
            }
            if (e.sequences.current.size() > caps.current) {
                e.sequences.current.erase(e.sequences.current.begin(),
                                          e.sequences.current.end() -
                                              static_cast<std::ptrdiff_t>(caps.current));
            }
        }
        out.push_back(std::move(e));
    }
    return out;
}

/// Distinct scenario ids present in a set of examples, ascending.
inline std::vector<std::size_t> scenarios_of(const std::vector<Example>& examples) {
    std::set<std::size_t> s;
    for (const auto& e : examples) s.insert(e.scenario_id);
    return {s.begin(), s.end()};
}

/// A train/test pair of examples with the vocabulary they index into.
struct Dataset {
    std::vector<Example> train;
    std::vector<Example> test;
    VocabSizes vocab;
};

/// Filters (optionally), builds sequences over the whole log, then splits
/// chronologically. Sequences are built before splitting so that test
/// examples see earlier training clicks as history.
inline Dataset prepare_dataset(const InteractionLog& log, SequenceCaps caps, double test_fraction,
                               bool keep_multi_scenario_users) {
    std::vector<InteractionRecord> records =
        keep_multi_scenario_users ? filter_multi_scenario_users(log.records) : log.records;
    auto split = chronological_split(build_sequences(records, caps), test_fraction);
    return {std::move(split.train), std::move(split.test), log.vocab_sizes()};
}

}  // namespace mscan
