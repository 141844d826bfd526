#include <fstream>

#include "doctest.h"
#include "meshnet/dataset.hpp"
#include "meshnet/error.hpp"
#include "meshnet/primitives.hpp"
#include "meshnet/synthetic.hpp"
#include "support.hpp"

using namespace meshnet;
namespace fs = std::filesystem;

namespace {

void write_mesh(const fs::path& p, const Mesh& m) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p);
  write_obj(m, out);
}

}  // namespace

TEST_CASE("classification layout: class ids follow sorted names") {
  const auto root = testing::temp_dir("ds_cls");
  write_mesh(root / "zebra/train/b.obj", tetrahedron());
  write_mesh(root / "zebra/train/a.obj", tetrahedron());
  write_mesh(root / "apple/test/c.obj", octahedron());
  write_mesh(root / "apple/train/d.obj", octahedron());
  const auto ds = load_dataset(root, Task::kClassification);
  CHECK(ds.class_names == std::vector<std::string>{"apple", "zebra"});
  REQUIRE(ds.entries.size() == 4);
  CHECK(ds.count(Split::kTrain) == 3);
  CHECK(ds.count(Split::kTest) == 1);
  CHECK(ds.entries[0].mesh_path.filename() == "c.obj");
  CHECK(ds.entries[0].label == 0);
  CHECK(ds.entries[0].split == Split::kTest);
  CHECK(ds.entries[2].mesh_path.filename() == "a.obj");
  CHECK(ds.entries[2].label == 1);
  const auto train = load_samples(ds, Split::kTrain);
  CHECK(train.size() == 3);
  CHECK(train[1].topo.edge_count() == 6);
  CHECK_THROWS_AS(check_labels(train, Task::kClassification, 1), DataError);
  CHECK_NOTHROW(check_labels(train, Task::kClassification, 2));
}

TEST_CASE("segmentation layout needs matching label files") {
  const auto root = testing::temp_dir("ds_seg");
  write_mesh(root / "train/a.obj", octahedron());
  write_eseg(root / "train/a.eseg", std::vector<int>(12, 1));
  const auto ds = load_dataset(root, Task::kSegmentation);
  const auto s = load_samples(ds, Split::kTrain);
  REQUIRE(s.size() == 1);
  CHECK(s[0].edge_labels == std::vector<int>(12, 1));
  CHECK_THROWS_AS(check_labels(s, Task::kSegmentation, 1), DataError);

  write_eseg(root / "train/a.eseg", std::vector<int>(11, 1));
  try {
    load_samples(load_dataset(root, Task::kSegmentation), Split::kTrain);
    FAIL("expected a mismatch");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("11") != std::string::npos);
    CHECK(msg.find("12") != std::string::npos);
  }
  write_mesh(root / "test/b.obj", octahedron());
  CHECK_THROWS_AS(load_dataset(root, Task::kSegmentation), DataError);
}

TEST_CASE("eseg parsing") {
  const auto root = testing::temp_dir("eseg");
  write_eseg(root / "x.eseg", {0, 2, 1});
  CHECK(read_eseg(root / "x.eseg") == std::vector<int>{0, 2, 1});
  std::ofstream(root / "bad.eseg") << "0\n1\nfoo\n";
  CHECK_THROWS_AS(read_eseg(root / "bad.eseg"), ParseError);
  std::ofstream(root / "neg.eseg") << "0\n-1\n";
  CHECK_THROWS(read_eseg(root / "neg.eseg"));
}

TEST_CASE("missing or empty roots") {
  const auto root = testing::temp_dir("ds_empty");
  CHECK_THROWS_AS(load_dataset(root / "nope", Task::kClassification), DataError);
  CHECK_THROWS_AS(load_dataset(root, Task::kClassification), DataError);
}

TEST_CASE("synthetic classification set") {
  const auto root = testing::temp_dir("syn_cls");
  SyntheticSpec spec;
  spec.classes = 2;
  spec.count = 20;
  spec.seed = 3;
  CHECK(gen_synthetic(root, spec) == 40);
  const auto ds = load_dataset(root, Task::kClassification);
  CHECK(ds.entries.size() == 40);
  CHECK(ds.count(Split::kTest) == 10);
  for (const auto& e : ds.entries) {
    const auto s = load_sample(e, Task::kClassification);
    CHECK(s.topo.edge_count() == 750);
    CHECK(euler_characteristic(s.mesh, s.topo) == 2);
    CHECK(signed_volume6(s.mesh) > 0);
  }

  const auto again = testing::temp_dir("syn_cls2");
  gen_synthetic(again, spec);
  for (const auto& e : ds.entries) {
    const auto rel = fs::relative(e.mesh_path, root);
    CHECK(testing::read_file(e.mesh_path) == testing::read_file(again / rel));
  }
}

TEST_CASE("synthetic segmentation set") {
  const auto root = testing::temp_dir("syn_seg");
  SyntheticSpec spec;
  spec.task = Task::kSegmentation;
  spec.classes = 3;
  spec.count = 8;
  spec.seed = 1;
  CHECK(gen_synthetic(root, spec) == 8);
  const auto ds = load_dataset(root, Task::kSegmentation);
  const auto s = load_samples(ds, Split::kTrain);
  CHECK(s.size() == 6);
  for (const auto& x : s) {
    CHECK(x.edge_labels.size() == 750);
    for (int p = 0; p < 3; ++p) CHECK(std::count(x.edge_labels.begin(), x.edge_labels.end(), p) > 50);
  }
  spec.classes = 7;
  CHECK_THROWS(gen_synthetic(root, spec));
}
