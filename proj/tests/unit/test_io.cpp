#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "covshift/csv_io.hpp"
#include "covshift/datagen.hpp"
#include "covshift/serialization.hpp"

using namespace covshift;

namespace {

std::filesystem::path tmp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("covshift_" + name);
}

}  // namespace

TEST_CASE("dataset csv round trip is exact") {
  Rng rng(1);
  const Dataset d = make_train(rng.normal_matrix(7, 3), rng.normal_vector(7));
  const auto path = tmp_file("roundtrip.csv");
  write_dataset_csv(path, d);
  const Dataset back = read_dataset_csv(path);
  CHECK(back.X == d.X);
  CHECK(*back.y == *d.y);

  const Dataset t = make_test(rng.normal_matrix(4, 2));
  write_dataset_csv(path, t);
  const Dataset tb = read_dataset_csv(path, Role::Test);
  CHECK_FALSE(tb.has_labels());
  CHECK(tb.role == Role::Test);
  std::filesystem::remove(path);
}

TEST_CASE("csv columns may appear in any order") {
  const auto path = tmp_file("order.csv");
  {
    std::ofstream out(path);
    out << "y, x2 ,x1\n1.5,2,3\n-1,4,5\n";
  }
  const Dataset d = read_dataset_csv(path);
  CHECK(d.X(0, 0) == 3.0);
  CHECK(d.X(0, 1) == 2.0);
  CHECK((*d.y)(1) == -1.0);
  std::filesystem::remove(path);
}

TEST_CASE("malformed csv files are rejected") {
  const auto path = tmp_file("bad.csv");
  for (const char* body : {"x1,x2\n1,2\n3\n", "x1,z\n1,2\n", "x1,x3\n1,2\n", "x1\nabc\n", "x1\nnan\n", ""}) {
    {
      std::ofstream out(path);
      out << body;
    }
    CHECK_THROWS(read_dataset_csv(path));
  }
  std::filesystem::remove(path);
  CHECK_THROWS(read_dataset_csv(tmp_file("missing.csv")));
}

TEST_CASE("vector csv round trip") {
  Rng rng(2);
  const Vector v = rng.normal_vector(9);
  const auto path = tmp_file("vec.csv");
  write_vector_csv(path, v, "beta");
  CHECK(read_vector_csv(path) == v);
  std::filesystem::remove(path);
}

TEST_CASE("json round trips") {
  Rng rng(3);
  KernelRidgeModel m;
  m.kernel = KernelSpec::polynomial(2, 0.5);
  m.gamma = 0.01;
  m.alpha = rng.normal_vector(3);
  m.anchors = rng.normal_matrix(3, 2);
  const json j = m;
  CHECK(j.at("gamma") == 0.01);
  CHECK(j.at("anchors").size() == 3);
  const auto back = json::parse(j.dump()).get<KernelRidgeModel>();
  CHECK(back.alpha == m.alpha);
  CHECK(back.anchors == m.anchors);
  CHECK(back.kernel.family == KernelFamily::Polynomial);
  CHECK(back.kernel.offset == 0.5);

  ErmFit f;
  f.loss = ErmLoss::Logistic;
  f.mode = ErmMode::UnweightedNr;
  f.lambda = 5;
  f.kernel = KernelSpec::gaussian(0.7);
  f.alpha = rng.normal_vector(2);
  f.span = rng.normal_matrix(2, 4);
  const auto fb = json::parse(json(f).dump()).get<ErmFit>();
  CHECK(fb.alpha == f.alpha);
  CHECK(fb.span == f.span);
  CHECK(fb.mode == ErmMode::UnweightedNr);
  CHECK(fb.kernel.sigma == 0.7);

  json bad = j;
  bad["alpha"] = json::array({1.0});
  CHECK_THROWS(bad.get<KernelRidgeModel>());
}

TEST_CASE("format_double keeps full precision") {
  const double v = 0.1 + 0.2;
  CHECK(std::stod(format_double(v)) == v);
}
