#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cogrl/problems.hpp"
#include "cogrl/tensor.hpp"
#include "cogrl/transactions.hpp"
#include "cogrl/tsv.hpp"

namespace cogrl {

// Transactions TSV: student_id, item_id, outcome, order (header required).
TransactionLog read_transactions(const TsvTable& table);
TransactionLog load_transactions(const std::filesystem::path& path);
std::string transactions_tsv(const TransactionLog& log);

// Binary PGM (P5, 1 channel) / PPM (P6, 3 channels), maxval <= 255. Pixels
// are scaled to [0, 1].
Tensor read_pnm(const std::filesystem::path& path);
// Quantizes [0, 1] values to 8 bits: round(v * 255).
std::string pnm_bytes(const Tensor& image);

// Manifest TSV: item_id, image (path relative to the manifest), answer.
DatasetBundle load_images(const std::filesystem::path& manifest);
// Writes <dir>/images/<item>.pgm|ppm and <dir>/<manifest_name>.
void save_images(const DatasetBundle& bundle, const std::filesystem::path& dir,
                 const std::string& manifest_name = "manifest.tsv");

// Cloze TSV: item_id, text, answer. Answer labels are the sorted distinct
// answers.
DatasetBundle read_cloze(const TsvTable& table);
DatasetBundle load_cloze(const std::filesystem::path& path);
std::string cloze_tsv(const DatasetBundle& bundle);

}  // namespace cogrl
