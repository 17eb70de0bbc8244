#include "cogrl/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cogrl/error.hpp"

namespace cogrl {

namespace {

std::string where(const TsvTable& table, const TsvRow& row) {
  return table.source + ":" + std::to_string(row.line) + ": ";
}

std::vector<std::string> sorted_labels(const std::vector<std::string>& answers) {
  std::set<std::string> distinct(answers.begin(), answers.end());
  return {distinct.begin(), distinct.end()};
}

std::size_t label_index(const std::vector<std::string>& labels, const std::string& answer) {
  return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), answer) - labels.begin());
}

}  // namespace

TransactionLog read_transactions(const TsvTable& table) {
  const std::size_t student = table.column("student_id");
  const std::size_t item = table.column("item_id");
  const std::size_t outcome = table.column("outcome");
  const std::size_t order = table.column("order");
  TransactionLog log;
  std::set<std::pair<std::string, std::uint64_t>> seen;
  for (const auto& row : table.rows) {
    Transaction t;
    t.student_id = row.fields[student];
    t.item_id = row.fields[item];
    if (t.student_id.empty() || t.item_id.empty()) throw InputError(where(table, row) + "empty student or item id");
    const auto& out = row.fields[outcome];
    if (out != "0" && out != "1") throw InputError(where(table, row) + "outcome '" + out + "' is not 0 or 1");
    t.outcome = out == "1" ? 1 : 0;
    const auto& ord = row.fields[order];
    if (ord.empty() || !std::all_of(ord.begin(), ord.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw InputError(where(table, row) + "order '" + ord + "' is not a positive integer");
    }
    try {
      t.order = std::stoull(ord);
    } catch (const std::exception&) {
      throw InputError(where(table, row) + "order '" + ord + "' is out of range");
    }
    if (t.order == 0) throw InputError(where(table, row) + "order must be positive");
    if (!seen.emplace(t.student_id, t.order).second) {
      throw InputError(where(table, row) + "duplicate order " + ord + " for student '" + t.student_id + "'");
    }
    log.rows.push_back(std::move(t));
  }
  return log;
}

TransactionLog load_transactions(const std::filesystem::path& path) { return read_transactions(read_tsv(path)); }

std::string transactions_tsv(const TransactionLog& log) {
  std::ostringstream out;
  out << "student_id\titem_id\toutcome\torder\n";
  for (const auto& t : log.rows) out << t.student_id << '\t' << t.item_id << '\t' << t.outcome << '\t' << t.order << '\n';
  return out.str();
}

Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image " + path.string());
  auto next_token = [&]() {
    std::string token;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!token.empty()) break;
        continue;
      }
      token.push_back(c);
    }
    return token;
  };
  const std::string magic = next_token();
  std::size_t channels = 0;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else throw InputError(path.string() + ": unsupported image format '" + magic + "' (need P5 or P6)");
  std::size_t width = 0, height = 0, maxval = 0;
  try {
    width = std::stoul(next_token());
    height = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw InputError(path.string() + ": malformed image header");
  }
  if (width == 0 || height == 0 || maxval == 0 || maxval > 255) {
    throw InputError(path.string() + ": unsupported image dimensions or maxval");
  }
  std::vector<unsigned char> pixels(width * height * channels);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
    throw InputError(path.string() + ": truncated pixel data");
  }
  Tensor image({channels, height, width});
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        image.at(c, y, x) = pixels[(y * width + x) * channels + c] / static_cast<double>(maxval);
  return image;
}

std::string pnm_bytes(const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw DimensionError("PNM images must be [1|3 x H x W]");
  }
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  std::string out = (channels == 1 ? "P5\n" : "P6\n") + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
  return out;
}

DatasetBundle load_images(const std::filesystem::path& manifest) {
  const TsvTable table = read_tsv(manifest);
  const std::size_t item = table.column("item_id");
  const std::size_t image = table.column("image");
  const std::size_t answer = table.column("answer");
  DatasetBundle bundle;
  std::vector<std::string> answers;
  for (const auto& row : table.rows) answers.push_back(row.fields[answer]);
  bundle.answer_labels = sorted_labels(answers);

  const auto base = manifest.parent_path();
  std::size_t channels = 0;
  for (const auto& row : table.rows) {
    Tensor pixels;
    try {
      pixels = read_pnm(base / row.fields[image]);
    } catch (const InputError& e) {
      throw InputError(where(table, row) + e.what());
    }
    if (channels == 0) channels = pixels.dim(0);
    if (pixels.dim(0) != channels) throw InputError(where(table, row) + "mixed channel counts in dataset");
    bundle.problems.push_back(
        {row.fields[item], std::move(pixels), label_index(bundle.answer_labels, row.fields[answer])});
  }
  bundle.validate();
  return bundle;
}

void save_images(const DatasetBundle& bundle, const std::filesystem::path& dir, const std::string& manifest_name) {
  std::filesystem::create_directories(dir / "images");
  std::ostringstream manifest;
  manifest << "item_id\timage\tanswer\n";
  for (const auto& p : bundle.problems) {
    const auto* image = std::get_if<Tensor>(&p.content);
    if (image == nullptr) throw InputError("problem '" + p.item_id + "' is not an image");
    const std::string rel = "images/" + p.item_id + (image->dim(0) == 1 ? ".pgm" : ".ppm");
    write_text_file(dir / rel, pnm_bytes(*image));
    manifest << p.item_id << '\t' << rel << '\t' << bundle.answer_labels.at(p.answer) << '\n';
  }
  write_text_file(dir / manifest_name, manifest.str());
}

DatasetBundle read_cloze(const TsvTable& table) {
  const std::size_t item = table.column("item_id");
  const std::size_t text = table.column("text");
  const std::size_t answer = table.column("answer");
  DatasetBundle bundle;
  std::vector<std::string> answers;
  for (const auto& row : table.rows) {
    if (row.fields[answer].empty()) throw InputError(where(table, row) + "empty answer");
    answers.push_back(row.fields[answer]);
  }
  bundle.answer_labels = sorted_labels(answers);
  for (const auto& row : table.rows) {
    ClozeContent content;
    try {
      content = parse_cloze(row.fields[text]);
    } catch (const InputError& e) {
      throw InputError(where(table, row) + e.what());
    }
    bundle.problems.push_back(
        {row.fields[item], std::move(content), label_index(bundle.answer_labels, row.fields[answer])});
  }
  bundle.validate();
  return bundle;
}

DatasetBundle load_cloze(const std::filesystem::path& path) { return read_cloze(read_tsv(path)); }

std::string cloze_tsv(const DatasetBundle& bundle) {
  std::ostringstream out;
  out << "item_id\ttext\tanswer\n";
  for (const auto& p : bundle.problems) {
    const auto* cloze = std::get_if<ClozeContent>(&p.content);
    if (cloze == nullptr) throw InputError("problem '" + p.item_id + "' is not a cloze question");
    out << p.item_id << '\t' << cloze->text << '\t' << bundle.answer_labels.at(p.answer) << '\n';
  }
  return out.str();
}

}  // namespace cogrl
