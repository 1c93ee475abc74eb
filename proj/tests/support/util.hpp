#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace octtest {

inline std::string repo_path(const std::string& rel) {
    return std::string(OCT_REPO_DIR) + "/" + rel;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace octtest
