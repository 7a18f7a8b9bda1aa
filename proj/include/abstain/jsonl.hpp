#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace abstain::jsonl {

// Builds one line-delimited record with insertion-ordered fields and fixed
// 6-decimal float formatting, so output files are byte-stable across runs
// and platforms.
class object {
public:
    object& put(std::string_view key, std::string_view value);
    object& put(std::string_view key, const char* value) {
        return put(key, std::string_view(value));
    }
    object& put(std::string_view key, const std::string& value) {
        return put(key, std::string_view(value));
    }
    object& put(std::string_view key, double value);
    object& put(std::string_view key, int value);
    object& put(std::string_view key, int64_t value);
    object& put(std::string_view key, uint64_t value);
    object& put(std::string_view key, bool value);
    object& put(std::string_view key, const object& nested);
    object& put(std::string_view key, std::span<const std::string> values);

    template <typename T>
    object& put_opt(std::string_view key, const std::optional<T>& value) {
        if (value) put(key, *value);
        return *this;
    }

    std::string str() const;  // single-line JSON, no trailing newline

private:
    object& raw(std::string_view key, std::string_view rendered);
    std::string body_;
};

std::string format_double(double value);

// Atomic line writer: content goes to a temporary file and moves into place
// on commit. An uncommitted writer leaves no partial output behind unless
// keep_partial_on_destroy is set (used to retain progress + resume markers).
class writer {
public:
    explicit writer(std::filesystem::path path);
    ~writer();

    writer(const writer&) = delete;
    writer& operator=(const writer&) = delete;

    void line(const object& record);
    void line(std::string_view raw);
    void commit();

    bool keep_partial_on_destroy = false;

private:
    std::filesystem::path final_path_;
    std::filesystem::path temp_path_;
    std::ofstream out_;
    bool committed_ = false;
};

// Parses every non-empty line; throws data_error naming the line on bad JSON.
std::vector<nlohmann::json> read_records(const std::string& path);

}  // namespace abstain::jsonl
