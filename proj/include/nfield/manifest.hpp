#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nfield/csv.hpp"

namespace nfield {

/// Reproducibility record written next to every command's outputs: enough to
/// re-run the exact invocation and check the inputs did not drift.
struct RunManifest {
    std::string command;
    std::string config_hash;  // 16 hex digits over the canonical config text
    std::uint64_t seed = 0;
    std::string tool_version;
    std::vector<std::string> outputs;  // basenames written by the run
};

inline void write_manifest(const std::string& dir, const RunManifest& m) {
    csv::Writer w(dir + "/manifest.csv");
    w.row({"key", "value"});
    w.row({"command", m.command});
    w.row({"config_hash", m.config_hash});
    w.row({"seed", std::to_string(m.seed)});
    w.row({"tool_version", m.tool_version});
    for (const auto& f : m.outputs) w.row({"output", f});
    w.close();
}

}  // namespace nfield
