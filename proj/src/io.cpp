#include "drsafe/io.hpp"

#include "drsafe/errors.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace drsafe::io {

namespace fs = std::filesystem;

std::string number(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw std::runtime_error("write failed for '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path);
}

Csv::Csv(std::vector<std::string> header) : columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
    text_ += "\n";
}

Csv& Csv::cell(double value) { return cell(number(value)); }

Csv& Csv::cell(std::size_t value) { return cell(std::to_string(value)); }

Csv& Csv::cell(const std::string& value) {
    if (filled_ == columns_) throw std::logic_error("csv row has too many cells");
    if (filled_) text_ += ",";
    text_ += value;
    ++filled_;
    return *this;
}

void Csv::end_row() {
    if (filled_ != columns_) throw std::logic_error("csv row has too few cells");
    text_ += "\n";
    filled_ = 0;
}

fs::path cache_dir(const fs::path& out) {
    if (const char* env = std::getenv("DRSAFE_CACHE_DIR"); env && *env) return env;
    return out / ".cache";
}

namespace {

constexpr char kMagic[8] = {'D', 'R', 'S', 'A', 'F', 'E', '0', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
bool get(std::istream& in, T& v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

} // namespace

void save_solution(const fs::path& path, const std::string& key, const RecursionResult& result) {
    std::ostringstream out(std::ios::binary);
    out.write(kMagic, sizeof kMagic);
    put(out, static_cast<std::uint64_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    const auto stages = static_cast<std::uint64_t>(result.values.size());
    const auto nodes = static_cast<std::uint64_t>(result.values.front().values().size());
    put(out, stages);
    put(out, nodes);
    for (const auto& v : result.values) out.write(reinterpret_cast<const char*>(v.values().data()), nodes * sizeof(double));
    for (const auto& p : result.policies) out.write(reinterpret_cast<const char*>(p.data()), nodes * sizeof(std::int32_t));
    write_atomic(path, out.str());
}

std::optional<RecursionResult> load_solution(const fs::path& path, const std::string& key,
                                             std::shared_ptr<const StateGrid> grid, const Box& safe_region) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) return std::nullopt;
    std::uint64_t key_size = 0, stages = 0, nodes = 0;
    if (!get(in, key_size) || key_size != key.size()) return std::nullopt;
    std::string stored(key_size, '\0');
    if (!in.read(stored.data(), static_cast<std::streamsize>(key_size)) || stored != key) return std::nullopt;
    if (!get(in, stages) || !get(in, nodes) || stages == 0 || nodes != grid->size()) return std::nullopt;

    RecursionResult r;
    for (std::uint64_t t = 0; t < stages; ++t) {
        std::vector<double> v(nodes);
        if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(nodes * sizeof(double)))) {
            return std::nullopt;
        }
        r.values.emplace_back(t, grid, safe_region, std::move(v));
    }
    for (std::uint64_t t = 0; t + 1 < stages; ++t) {
        std::vector<std::int32_t> p(nodes);
        if (!in.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(nodes * sizeof(std::int32_t)))) {
            return std::nullopt;
        }
        r.policies.push_back(std::move(p));
    }
    r.diagnostics.assign(stages - 1, BackupDiagnostics{});
    return r;
}

} // namespace drsafe::io
