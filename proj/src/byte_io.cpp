// SPDX-License-Identifier: Apache-2.0

#include "byte_io.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

namespace unncsi::detail {

std::vector<std::uint8_t> read_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::string &path, std::span<const std::uint8_t> bytes)
{
    const std::string tmp = path + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp);
        out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw std::runtime_error("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

} // namespace unncsi::detail
