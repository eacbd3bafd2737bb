#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spice {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

// n per-sample gradient vectors of dimension d, plus one identifier per sample.
// Immutable after construction.
class GradientSet {
 public:
  // Validates n >= 1, d >= 1, all entries finite and ids unique. Empty ids
  // means "0".."n-1".
  explicit GradientSet(RowMatrix data, std::vector<std::string> ids = {});

  std::size_t n() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  const RowMatrix& data() const noexcept { return data_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  bool has_default_ids() const noexcept;

  Eigen::Map<const Vector> row(std::size_t i) const {
    return Eigen::Map<const Vector>(data_.row(static_cast<Eigen::Index>(i)).data(), data_.cols());
  }

  // Rows at the given indices, in order.
  RowMatrix gather(const std::vector<std::size_t>& indices) const;

 private:
  RowMatrix data_;
  std::vector<std::string> ids_;
};

enum class FileFormat { binary, csv };
enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

// On-disk layout of the 32-byte SPGR header (all integers little-endian).
struct GradientFileHeader {
  static constexpr char kMagic[4] = {'S', 'P', 'G', 'R'};
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kSize = 32;

  std::uint32_t version = kVersion;
  std::uint64_t n = 0;
  std::uint64_t d = 0;
  DType dtype = DType::f64;
};

GradientSet load_gradients(const std::filesystem::path& path, FileFormat format);

// Writes an SPGR file. Non-default ids go to the `<path>.ids.json` sidecar.
void save_gradients(const GradientSet& gs, const std::filesystem::path& path, DType dtype);

// Comma-separated rows in shortest round-trip form, no header row.
void save_gradients_csv(const GradientSet& gs, const std::filesystem::path& path);

std::filesystem::path ids_sidecar_path(const std::filesystem::path& path);

struct GradientNorms {
  std::vector<double> norms;
  double g_max = 0.0;
};

GradientNorms gradient_norms(const GradientSet& gs);

}  // namespace spice
