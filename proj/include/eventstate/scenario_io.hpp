#pragma once

// Scenario files: a JSON description of a pair of measurement events, with
// named shortcuts for common states, bases and rotations.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eventstate/bell.hpp"
#include "eventstate/errors.hpp"
#include "eventstate/event_states.hpp"
#include "eventstate/serialization.hpp"

namespace eventstate {

/// Unreadable or missing input file.
class FileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed scenario document. `field` is a JSON pointer, `line` 1-based (0 if unknown).
class SchemaError : public InvalidInput {
public:
    SchemaError(std::string source, std::string field, std::size_t line, const std::string& message);
    const std::string& field() const noexcept { return field_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string field_;
    std::size_t line_;
};

enum class BuildMode { Auto, Instant, Fuzzy, Timed };

std::string to_string(BuildMode mode);

struct ScenarioFile {
    std::string source;
    EventScenario scenario;
    BuildMode build = BuildMode::Auto;
    std::optional<ChshSettings> chsh;
    std::vector<std::string> warnings;

    /// Auto resolves to fuzzy with timing, instant without.
    BuildMode resolved_build() const;
};

ScenarioFile parse_scenario(std::string_view text, const std::string& source = "<scenario>");
ScenarioFile load_scenario(const std::filesystem::path& path);

EventState build_scenario(const ScenarioFile& file);

std::string read_text_file(const std::filesystem::path& path);
void save_state(const EventState& state, const std::filesystem::path& path);
EventState load_state(const std::filesystem::path& path);

} // namespace eventstate
