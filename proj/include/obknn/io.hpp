#pragma once

// File interfaces: JSON Lines instance ingestion and CSV output.
//
// Instance JSONL, one object per line:
//   {"id": int?, "embedding": [num,...], "label": "str", "text": "str?",
//    "base_dist": [num,...]?, "base_scores": [num,...]?}
// Train instances need embedding+label; test instances additionally need
// base_dist (probabilities) or base_scores (raw per-label scores, run
// through softmax at ingestion). Parse errors carry file and line.
//
// CSV output: header row then data rows, UTF-8, '.' decimal separator
// regardless of locale.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "obknn/core.hpp"
#include "obknn/errors.hpp"

namespace obknn {

struct Instance {
    std::size_t line = 0;  // 1-based line in the source file, for error messages
    std::optional<std::uint64_t> id;
    std::vector<float> embedding;  // empty when absent
    std::string label;
    std::optional<std::string> text;
    std::optional<std::vector<double>> base_dist;
    std::optional<std::vector<double>> base_scores;
};

namespace detail {

inline FormatError parse_error(const std::string& path, std::size_t line,
                               const std::string& msg) {
    return FormatError(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace detail

inline std::vector<Instance> read_instances_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw FormatError("cannot open '" + path + "'");
    }
    std::vector<Instance> out;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(f, raw)) {
        ++line_no;
        // Tolerate blank lines and a trailing \r from CRLF files.
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (raw.find_first_not_of(" \t") == std::string::npos) continue;

        nlohmann::json j = nlohmann::json::parse(raw, nullptr, false);
        if (j.is_discarded()) {
            throw detail::parse_error(path, line_no, "invalid JSON");
        }
        if (!j.is_object()) {
            throw detail::parse_error(path, line_no, "expected a JSON object");
        }

        Instance inst;
        inst.line = line_no;
        try {
            if (j.contains("id")) inst.id = j.at("id").get<std::uint64_t>();
            if (j.contains("embedding")) {
                inst.embedding = j.at("embedding").get<std::vector<float>>();
            }
            if (j.contains("label")) inst.label = j.at("label").get<std::string>();
            if (j.contains("text")) inst.text = j.at("text").get<std::string>();
            if (j.contains("base_dist")) {
                inst.base_dist = j.at("base_dist").get<std::vector<double>>();
            }
            if (j.contains("base_scores")) {
                inst.base_scores = j.at("base_scores").get<std::vector<double>>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw detail::parse_error(path, line_no, e.what());
        }
        if (inst.base_dist && inst.base_scores) {
            throw detail::parse_error(path, line_no,
                                      "base_dist and base_scores are mutually exclusive");
        }
        out.push_back(std::move(inst));
    }
    return out;
}

inline void write_instances_jsonl(const std::string& path, std::span<const Instance> instances) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    for (const Instance& inst : instances) {
        nlohmann::json j;
        if (inst.id) j["id"] = *inst.id;
        if (!inst.embedding.empty()) j["embedding"] = inst.embedding;
        if (!inst.label.empty()) j["label"] = inst.label;
        if (inst.text) j["text"] = *inst.text;
        if (inst.base_dist) j["base_dist"] = *inst.base_dist;
        if (inst.base_scores) j["base_scores"] = *inst.base_scores;
        f << j.dump() << '\n';
    }
    if (!f) {
        throw FormatError("write to '" + path + "' failed");
    }
}

// Locale-independent number formatting for CSV cells.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : f_(path, std::ios::trunc), path_(path) {
        if (!f_) {
            throw FormatError("cannot open '" + path + "' for writing");
        }
    }

    void row(std::span<const std::string> cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) f_ << ',';
            f_ << cells[i];
        }
        f_ << '\n';
    }

    void row(std::initializer_list<std::string> cells) {
        row(std::span<const std::string>(cells.begin(), cells.size()));
    }

    void close() {
        f_.close();
        if (f_.fail()) {
            throw FormatError("write to '" + path_ + "' failed");
        }
    }

private:
    std::ofstream f_;
    std::string path_;
};

}  // namespace obknn
