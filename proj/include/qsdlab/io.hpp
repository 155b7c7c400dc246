#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace qsd {

// Writes `content` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Output files staged in memory and committed together once every one is ready.
class OutputBundle {
public:
    void add(std::string name, std::string content);
    // Creates `dir` if needed, then writes each file atomically.
    void commit(const std::filesystem::path& dir) const;
    const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace qsd
