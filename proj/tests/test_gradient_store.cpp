#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spice/error.hpp"
#include "spice/gradient_store.hpp"

namespace fs = std::filesystem;
using namespace spice;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("spice_gs_" + std::to_string(std::random_device{}()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Hand-assembled SPGR bytes, independent of save_gradients.
std::string spgr_bytes(std::uint64_t n, std::uint64_t d, const std::vector<double>& payload, std::uint32_t version = 1) {
  std::string s = "SPGR";
  auto put = [&s](std::uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
  };
  put(version, 4);
  put(n, 8);
  put(d, 8);
  s.push_back(1);
  s.append(7, '\0');
  for (const double v : payload) put(std::bit_cast<std::uint64_t>(v), 8);
  return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected spice::Error";
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST(GradientStore, LoadsHandWrittenBinary) {
  TempDir dir;
  write_text(dir / "g.spgr", spgr_bytes(2, 3, {1, 0, 0, 0, 1, 0}));
  const auto gs = load_gradients(dir / "g.spgr", FileFormat::binary);
  ASSERT_EQ(gs.n(), 2u);
  ASSERT_EQ(gs.d(), 3u);
  EXPECT_EQ(gs.row(0), Eigen::Vector3d(1, 0, 0));
  EXPECT_EQ(gs.row(1), Eigen::Vector3d(0, 1, 0));
  EXPECT_EQ(gs.ids()[1], "1");
}

TEST(GradientStore, HeaderLayoutIsBitExact) {
  TempDir dir;
  const auto gs = oracle::from_rows({{1, 0, 0}, {0, 1, 0}});
  save_gradients(gs, dir / "g.spgr", DType::f64);
  std::ifstream in(dir / "g.spgr", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(bytes, spgr_bytes(2, 3, {1, 0, 0, 0, 1, 0}));
}

TEST(GradientStore, LoadsCsvWithAndWithoutHeader) {
  TempDir dir;
  write_text(dir / "a.csv", "1.0,0.0\n0.0,1.0");
  const auto a = load_gradients(dir / "a.csv", FileFormat::csv);
  EXPECT_EQ(a.n(), 2u);
  EXPECT_EQ(a.d(), 2u);
  EXPECT_DOUBLE_EQ(a.data()(1, 1), 1.0);

  write_text(dir / "b.csv", "g0,g1,g2\r\n1,2,3\r\n-4.5,5e-3,6\r\n\n");
  const auto b = load_gradients(dir / "b.csv", FileFormat::csv);
  EXPECT_EQ(b.n(), 2u);
  EXPECT_EQ(b.d(), 3u);
  EXPECT_DOUBLE_EQ(b.data()(1, 1), 5e-3);
}

TEST(GradientStore, ErrorPaths) {
  TempDir dir;
  auto bytes = spgr_bytes(2, 3, {1, 0, 0, 0, 1, 0});
  write_text(dir / "short.spgr", bytes.substr(0, bytes.size() - 1));
  EXPECT_EQ(code_of([&] { load_gradients(dir / "short.spgr", FileFormat::binary); }), ErrorCode::TruncatedPayload);

  auto bad = bytes;
  bad[0] = 'X';
  write_text(dir / "magic.spgr", bad);
  EXPECT_EQ(code_of([&] { load_gradients(dir / "magic.spgr", FileFormat::binary); }), ErrorCode::BadMagic);

  write_text(dir / "v2.spgr", spgr_bytes(2, 3, {1, 0, 0, 0, 1, 0}, 2));
  EXPECT_EQ(code_of([&] { load_gradients(dir / "v2.spgr", FileFormat::binary); }), ErrorCode::UnsupportedVersion);

  write_text(dir / "nan.spgr", spgr_bytes(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}));
  try {
    load_gradients(dir / "nan.spgr", FileFormat::binary);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteValue);
    EXPECT_NE(std::string(e.what()).find("row 0, col 1"), std::string::npos);
  }

  write_text(dir / "ragged.csv", "1,2\n3\n");
  EXPECT_EQ(code_of([&] { load_gradients(dir / "ragged.csv", FileFormat::csv); }), ErrorCode::RaggedCsv);
  write_text(dir / "inf.csv", "1,2\n3,inf\n");
  EXPECT_EQ(code_of([&] { load_gradients(dir / "inf.csv", FileFormat::csv); }), ErrorCode::NonFiniteValue);
  EXPECT_EQ(code_of([&] { load_gradients(dir / "missing.csv", FileFormat::csv); }), ErrorCode::IoError);

  const auto gs = oracle::from_rows({{1.0}});
  EXPECT_EQ(code_of([&] { save_gradients(gs, dir / "no_such_dir" / "x.spgr", DType::f64); }), ErrorCode::IoError);
}

TEST(GradientStore, RejectsInvalidSets) {
  EXPECT_EQ(code_of([] { GradientSet(RowMatrix(0, 3)); }), ErrorCode::InvalidGradientSet);
  RowMatrix m(2, 1);
  m << 1, 2;
  EXPECT_EQ(code_of([&] { GradientSet(m, {"a", "a"}); }), ErrorCode::InvalidGradientSet);
}

TEST(GradientStore, RoundTripIsBitExactForF64) {
  TempDir dir;
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + gen() % 9, d = 1 + gen() % 7;
    RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      // Arbitrary finite bit patterns, including subnormals and signed zeros.
      double v;
      do v = std::bit_cast<double>(gen()); while (!std::isfinite(v));
      m.data()[i] = v;
    }
    const GradientSet gs(m);
    save_gradients(gs, dir / "r.spgr", DType::f64);
    const auto back = load_gradients(dir / "r.spgr", FileFormat::binary);
    ASSERT_EQ(back.n(), n);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      ASSERT_EQ(std::bit_cast<std::uint64_t>(back.data().data()[i]), std::bit_cast<std::uint64_t>(m.data()[i]));
    }
  }
}

TEST(GradientStore, F32RoundTripTruncates) {
  TempDir dir;
  const auto gs = oracle::gaussian_set(5, 4, 3);
  save_gradients(gs, dir / "f.spgr", DType::f32);
  const auto back = load_gradients(dir / "f.spgr", FileFormat::binary);
  for (Eigen::Index i = 0; i < gs.data().size(); ++i) {
    EXPECT_EQ(back.data().data()[i], static_cast<double>(static_cast<float>(gs.data().data()[i])));
  }
}

TEST(GradientStore, NonFiniteInjectionIsAlwaysRejected) {
  TempDir dir;
  std::mt19937 gen(5);
  const double bad_values[] = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity(),
                               -std::numeric_limits<double>::infinity()};
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + gen() % 6, d = 1 + gen() % 6;
    std::vector<double> payload(n * d, 0.5);
    const std::size_t pos = gen() % payload.size();
    payload[pos] = bad_values[trial % 3];
    write_text(dir / "x.spgr", spgr_bytes(n, d, payload));
    EXPECT_EQ(code_of([&] { load_gradients(dir / "x.spgr", FileFormat::binary); }), ErrorCode::NonFiniteValue);
  }
}

TEST(GradientStore, IdSidecar) {
  TempDir dir;
  RowMatrix m(2, 2);
  m << 1, 2, 3, 4;
  const GradientSet gs(m, {"alpha", "beta"});
  save_gradients(gs, dir / "s.spgr", DType::f64);
  ASSERT_TRUE(fs::exists(ids_sidecar_path(dir / "s.spgr")));
  const auto back = load_gradients(dir / "s.spgr", FileFormat::binary);
  EXPECT_EQ(back.ids(), gs.ids());

  write_text(dir / "c.csv", "1,2\n3,4\n");
  write_text(dir / "c.csv.ids.json", "[\"x\",\"y\"]");
  EXPECT_EQ(load_gradients(dir / "c.csv", FileFormat::csv).ids()[1], "y");
  write_text(dir / "c.csv.ids.json", "[\"x\"]");
  EXPECT_EQ(code_of([&] { load_gradients(dir / "c.csv", FileFormat::csv); }), ErrorCode::InvalidGradientSet);
}

TEST(GradientStore, Norms) {
  const auto gs = oracle::from_rows({{1, 0}, {0, 2}, {0, 0}});
  const auto norms = gradient_norms(gs);
  EXPECT_DOUBLE_EQ(norms.norms[0], 1.0);
  EXPECT_DOUBLE_EQ(norms.norms[2], 0.0);
  EXPECT_DOUBLE_EQ(norms.g_max, 2.0);

  const auto rnd = oracle::gaussian_set(8, 4, 42);
  const auto rn = gradient_norms(rnd);
  double g_max = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double expected = oracle::naive_norm(oracle::to_vec(rnd, i));
    EXPECT_NEAR(rn.norms[i], expected, 1e-14 * expected);
    g_max = std::max(g_max, expected);
  }
  EXPECT_NEAR(rn.g_max, g_max, 1e-14 * g_max);
}
