#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>

#include "rephoto/error.hpp"

namespace rephoto {

/// Runs `write(tmp)` against a sibling temporary file and renames it onto
/// `path` once the writer returns. The temporary is removed on failure.
template <typename Writer>
void atomic_write(std::filesystem::path const& path, Writer&& write)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec)
            throw IoError("cannot create directory " +
                          path.parent_path().string() + ": " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    try {
        write(tmp);
    } catch (...) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw;
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() +
                      ": " + ec.message());
}

inline void write_text_file(std::filesystem::path const& path,
                            std::string_view text)
{
    atomic_write(path, [&](std::filesystem::path const& tmp) {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw IoError("cannot open for writing: " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out)
            throw IoError("failed writing " + path.string());
    });
}

inline std::string read_text_file(std::filesystem::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

}  // namespace rephoto
