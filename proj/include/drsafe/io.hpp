#pragma once

#include "drsafe/bellman.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace drsafe::io {

/// %.17g, so values round-trip exactly.
std::string number(double value);

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Accumulates a CSV with a one-line header and writes it atomically.
class Csv {
public:
    explicit Csv(std::vector<std::string> header);

    Csv& cell(double value);
    Csv& cell(std::size_t value);
    Csv& cell(const std::string& value);
    void end_row();

    const std::string& text() const { return text_; }
    void write(const std::filesystem::path& path) const { write_atomic(path, text_); }

private:
    std::size_t columns_;
    std::size_t filled_ = 0;
    std::string text_;
};

/// DRSAFE_CACHE_DIR if set, otherwise `<out>/.cache`.
std::filesystem::path cache_dir(const std::filesystem::path& out);

/// Binary cache of value functions and policies keyed by canonical settings text.
/// The key is stored in the file, so hash collisions read as misses.
void save_solution(const std::filesystem::path& path, const std::string& key, const RecursionResult& result);

/// Returns nothing if the file is missing, unreadable, or was written for another key.
std::optional<RecursionResult> load_solution(const std::filesystem::path& path, const std::string& key,
                                             std::shared_ptr<const StateGrid> grid, const Box& safe_region);

} // namespace drsafe::io
