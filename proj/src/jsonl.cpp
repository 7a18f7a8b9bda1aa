#include "abstain/jsonl.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "abstain/errors.hpp"
#include "abstain/util.hpp"

namespace abstain::jsonl {

std::string format_double(double value) {
    if (!std::isfinite(value)) {
        // JSON has no inf literal; thresholds use a large sentinel on read
        if (std::isnan(value)) throw invalid_input_error("cannot serialize NaN");
        return value > 0 ? "1e308" : "-1e308";
    }
    if (value == 0.0) value = 0.0;  // normalize -0
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

object& object::raw(std::string_view key, std::string_view rendered) {
    if (!body_.empty()) body_ += ',';
    body_ += nlohmann::json(std::string(key)).dump();
    body_ += ':';
    body_ += rendered;
    return *this;
}

object& object::put(std::string_view key, std::string_view value) {
    return raw(key, nlohmann::json(std::string(value)).dump());
}

object& object::put(std::string_view key, double value) {
    return raw(key, format_double(value));
}

object& object::put(std::string_view key, int value) {
    return raw(key, std::to_string(value));
}

object& object::put(std::string_view key, int64_t value) {
    return raw(key, std::to_string(value));
}

object& object::put(std::string_view key, uint64_t value) {
    return raw(key, std::to_string(value));
}

object& object::put(std::string_view key, bool value) {
    return raw(key, value ? "true" : "false");
}

object& object::put(std::string_view key, const object& nested) {
    return raw(key, nested.str());
}

object& object::put(std::string_view key, std::span<const std::string> values) {
    std::string arr = "[";
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) arr += ',';
        arr += nlohmann::json(values[i]).dump();
    }
    arr += ']';
    return raw(key, arr);
}

std::string object::str() const { return "{" + body_ + "}"; }

writer::writer(std::filesystem::path path) : final_path_(std::move(path)) {
    temp_path_ = final_path_;
    temp_path_ += ".tmp";
    if (final_path_.has_parent_path()) {
        std::filesystem::create_directories(final_path_.parent_path());
    }
    out_.open(temp_path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw data_error("cannot open output file: " + temp_path_.string());
}

writer::~writer() {
    if (committed_) return;
    out_.close();
    std::error_code ec;
    if (keep_partial_on_destroy) {
        std::filesystem::rename(temp_path_, final_path_, ec);
    } else {
        std::filesystem::remove(temp_path_, ec);
    }
}

void writer::line(const object& record) { line(record.str()); }

void writer::line(std::string_view raw) {
    out_ << raw << '\n';
    if (!out_) throw data_error("write failed: " + temp_path_.string());
}

void writer::commit() {
    out_.flush();
    out_.close();
    if (!out_) throw data_error("flush failed: " + temp_path_.string());
    std::filesystem::rename(temp_path_, final_path_);
    committed_ = true;
}

std::vector<nlohmann::json> read_records(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::vector<nlohmann::json> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw data_error(path + ":" + std::to_string(line_no) + ": bad record: " + e.what());
        }
    }
    return records;
}

}  // namespace abstain::jsonl
