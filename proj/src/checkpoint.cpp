#include "cogrl/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cogrl/error.hpp"

namespace cogrl {

namespace {
constexpr const char* kMagic = "cogrl-checkpoint";
constexpr int kVersion = 1;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void write_checkpoint(const Network& net, const std::map<std::string, std::string>& meta,
                      std::ostream& out) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "architecture " << net.architecture() << '\n';
  for (const auto& [key, value] : net.config()) out << "config " << key << ' ' << value << '\n';
  for (const auto& [key, value] : meta) {
    if (key.find_first_of(" \t\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw InputError("checkpoint meta entries must be single-line with a space-free key");
    }
    out << "meta " << key << ' ' << value << '\n';
  }
  for (const auto& [name, tensor] : net.parameter_views()) {
    out << "parameter " << name << ' ' << tensor->rank();
    for (auto extent : tensor->shape()) out << ' ' << extent;
    out << '\n';
    for (std::size_t n = 0; n < tensor->size(); ++n) {
      out << format_double((*tensor)[n]) << ((n % 8 == 7 || n + 1 == tensor->size()) ? '\n' : ' ');
    }
  }
  out << "end\n";
}

void save_checkpoint(const Network& net, const std::map<std::string, std::string>& meta,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  write_checkpoint(net, meta, out);
  if (!out) throw InputError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw InputError("not a cogrl checkpoint");
  if (version != kVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  }
  std::string word, architecture;
  if (!(in >> word >> architecture) || word != "architecture") {
    throw InputError("checkpoint is missing its architecture line");
  }

  NetworkConfig config;
  Checkpoint checkpoint;
  std::string line;
  std::getline(in, line);
  std::streampos params_start = in.tellg();
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    fields >> word;
    if (word == "config") {
      std::string key, value;
      fields >> key >> value;
      config[key] = value;
    } else if (word == "meta") {
      std::string key;
      fields >> key;
      std::string value;
      std::getline(fields, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      checkpoint.meta[key] = value;
    } else {
      break;
    }
    params_start = in.tellg();
  }
  in.clear();
  in.seekg(params_start);

  checkpoint.network = make_network_skeleton(architecture, config);
  for (auto& ref : checkpoint.network->parameters()) {
    std::string name;
    std::size_t rank = 0;
    if (!(in >> word >> name >> rank) || word != "parameter") {
      throw InputError("checkpoint parameter block missing for " + ref.name);
    }
    if (name != ref.name) {
      throw InputError("checkpoint parameter '" + name + "' found where '" + ref.name + "' expected");
    }
    std::vector<std::size_t> shape(rank);
    for (auto& extent : shape) in >> extent;
    if (shape != ref.tensor->shape()) {
      throw DimensionError("checkpoint parameter " + name + " has unexpected shape");
    }
    for (double& v : ref.tensor->values()) {
      if (!(in >> v)) throw InputError("checkpoint truncated inside parameter " + name);
    }
  }
  if (!(in >> word) || word != "end") throw InputError("checkpoint has trailing or missing data");
  return checkpoint;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace cogrl
