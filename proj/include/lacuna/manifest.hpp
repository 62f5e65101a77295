#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "lacuna/error.hpp"

namespace lacuna {

/// Record of one CLI run, written next to its outputs as key=value lines.
struct RunManifest {
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> flags;
  std::vector<std::pair<std::string, std::string>> seeds;
  std::vector<std::pair<std::string, std::string>> input_digests;
  std::vector<std::pair<std::string, std::string>> outputs;
  std::vector<std::pair<std::string, std::string>> values;
  double wall_seconds = 0.0;

  std::string text() const {
    std::string out = "subcommand=" + subcommand + "\n";
    auto section = [&](const char* prefix, const auto& entries) {
      for (const auto& [k, v] : entries) out += std::string(prefix) + k + "=" + v + "\n";
    };
    section("flag.", flags);
    section("seed.", seeds);
    section("input.", input_digests);
    section("output.", outputs);
    section("value.", values);
    out += "wall_seconds=" + std::to_string(wall_seconds) + "\n";
    return out;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text();
  }
};

}  // namespace lacuna
