#pragma once

// Command implementations behind the eventstate executable. Each cmd_*
// returns its report as JSON and throws on failure; run() does argument
// parsing, rendering and the mapping from errors to exit codes.

#include <exception>
#include <iosfwd>
#include <optional>
#include <string>

#include "eventstate/serialization.hpp"

namespace eventstate::cli {

enum class Format { Text, Json, Csv };

enum ExitCode : int { kOk = 0, kMissingFile = 1, kValidation = 2, kNumerical = 3 };

struct DemoOptions {
    double gamma = 1.0;
    double dt = 0.001;
};

Json cmd_validate(const std::string& path);
/// Writes the state to out_path when given; otherwise the state is embedded in the report.
Json cmd_build(const std::string& path, const std::optional<std::string>& out_path);
/// kind: "coherence" or "timecorr".
Json cmd_witness(const std::string& path, const std::string& kind);
Json cmd_discriminate(const std::string& path);
Json cmd_classical_corr(const std::string& path);
Json cmd_chsh(const std::string& path);
/// name: appendix-e, decay, hadamard-tl or bell-sl.
Json cmd_demo(const std::string& name, const DemoOptions& options = {});

/// Rounds to 12 significant digits and prints in the requested format.
void render(const Json& report, Format format, std::ostream& out);

/// Exit code for an exception escaping a command: FileError 1, invalid input
/// or malformed JSON 2, anything else (NumericalFailure included) 3.
int exit_code_for(const std::exception& e);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace eventstate::cli
