#include "qsdlab/io.hpp"

#include <fstream>
#include <system_error>

#include <unistd.h>

#include "qsdlab/errors.hpp"

namespace qsd {

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ValidationError("cannot open " + tmp.string() + " for writing");
        }
        out << content;
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw ValidationError("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        std::filesystem::remove(tmp, ignored);
        throw ValidationError("cannot move output into place at " + path.string() + ": " + ec.message());
    }
}

void OutputBundle::add(std::string name, std::string content) {
    files_.emplace_back(std::move(name), std::move(content));
}

void OutputBundle::commit(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw ValidationError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    for (const auto& [name, content] : files_) write_file_atomic(dir / name, content);
}

}  // namespace qsd
