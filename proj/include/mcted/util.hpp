#pragma once

#include <stdexcept>
#include <string>

namespace mcted {

struct dimension_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct unknown_type_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Verbosity is controlled by the MCTED_LOG environment variable: quiet|info|debug.
enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level();
void log_info(const std::string& message);
void log_debug(const std::string& message);

// Every number we emit (metrics stream, eval reports) goes through this so
// identical runs produce byte-identical output.
std::string format_double(double value);
// Shorter form for labels and map keys (sweep values, run ids).
std::string format_double_short(double value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace mcted
