#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mechdet/cli.hpp"

namespace testutil {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

inline CliResult mechdet_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mechdet");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliResult r;
    r.code = mechdet::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// relative path -> bytes for every regular file under `root`
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[std::filesystem::relative(e.path(), root).string()] = slurp(e.path());
    }
    return files;
}

}  // namespace testutil
