#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "cogrl/network.hpp"

namespace cogrl {

// Text checkpoint, version 1:
//
//   cogrl-checkpoint 1
//   architecture <tag>
//   config <key> <value>            (one per NetworkConfig entry)
//   meta <key> <value to end of line>
//   parameter <name> <rank> <extent>...
//   <values, %.17g, whitespace separated>
//   ...
//   end
//
// Parameters appear in Network::parameters() order. Values round-trip exactly.
struct Checkpoint {
  std::unique_ptr<Network> network;
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const Network& net, const std::map<std::string, std::string>& meta,
                     const std::filesystem::path& path);
void write_checkpoint(const Network& net, const std::map<std::string, std::string>& meta,
                      std::ostream& out);

Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint read_checkpoint(std::istream& in);

}  // namespace cogrl
