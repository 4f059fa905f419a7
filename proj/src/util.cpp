#include "mcted/util.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mcted {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("MCTED_LOG");
        if (env == nullptr) return LogLevel::info;
        if (std::strcmp(env, "quiet") == 0) return LogLevel::quiet;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

void log_info(const std::string& message) {
    if (log_level() >= LogLevel::info) {
        std::cerr << "[mcted] " << message << "\n";
    }
}

void log_debug(const std::string& message) {
    if (log_level() >= LogLevel::debug) {
        std::cerr << "[mcted:debug] " << message << "\n";
    }
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return std::string(buf);
}

std::string format_double_short(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return std::string(buf);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open file for reading: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw io_error("cannot open file for writing: " + path);
    }
    out << text;
    if (!out) {
        throw io_error("failed while writing: " + path);
    }
}

}  // namespace mcted
