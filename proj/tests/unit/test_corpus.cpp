// Copyright 2026 The GlitchQA Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "glitchqa/corpus.hpp"
#include "helpers.hpp"

using namespace glitchqa;
using namespace glitchqa::testing;

namespace {

CorpusManifest small_corpus(const TempDir& dir, int objects = 5, int views = 5) {
  CorpusConfig c;
  c.n_objects = objects;
  c.views_per_object = views;
  c.width = c.height = 32;
  c.master_seed = 3;
  return build_corpus(c, dir / "corpus");
}

// In-memory manifest with no files; enough for split arithmetic.
CorpusManifest synthetic_records(int objects, int views) {
  CorpusManifest m;
  for (int o = 0; o < objects; ++o) {
    for (int v = 0; v < views; ++v) {
      SampleRecord r;
      r.object_id = static_cast<std::uint64_t>(o);
      r.view_id = static_cast<std::uint64_t>(v);
      r.sample_id = make_sample_id(r.object_id, r.view_id);
      r.cls = class_for_view(r.view_id);
      m.records.push_back(r);
    }
  }
  return m;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("minimal balanced corpus") {
  TempDir dir("corpus");
  const CorpusManifest m = small_corpus(dir);
  CHECK(m.records.size() == 25);
  const auto counts = class_counts(m);
  for (int c = 0; c < kNumClasses; ++c) CHECK(counts.at("train")[c] == 5);
  for (const auto& r : m.records) {
    CHECK(std::filesystem::exists(m.resolve(r)));
    CHECK(std::filesystem::exists(m.root / r.mask_path));
    CHECK(r.cls == class_for_view(r.view_id));
  }
  CHECK(verify_manifest(m).empty());
  const Image img = read_png(m.resolve(m.records[7]));
  CHECK(img.width == 32);
  const Mask mask = read_mask_png(m.root / m.records[7].mask_path);
  CHECK(mask.coverage() >= kMinMaskCoverage);
}

TEST_CASE("corpus arithmetic for larger configurations") {
  // Record bookkeeping only; no rendering.
  const CorpusManifest full = synthetic_records(127, 100);
  CHECK(full.records.size() == 12700);
  CHECK(class_counts(full).at("train")[0] == 2540);
  const CorpusManifest desk = synthetic_records(50, 40);
  CHECK(desk.records.size() == 2000);
  for (int c = 0; c < kNumClasses; ++c) CHECK(class_counts(desk).at("train")[c] == 400);
}

TEST_CASE("build preconditions and directory collisions") {
  TempDir dir("corpus");
  CorpusConfig c;
  c.n_objects = 4;
  c.views_per_object = 5;
  CHECK_THROWS_AS(build_corpus(c, dir / "a"), ParameterError);
  c.n_objects = 5;
  c.views_per_object = 7;
  CHECK_THROWS_AS(build_corpus(c, dir / "a"), ParameterError);
  small_corpus(dir);
  CHECK_THROWS_AS(small_corpus(dir), IoError);
  CorpusConfig again;
  again.n_objects = 5;
  again.views_per_object = 5;
  again.width = again.height = 32;
  again.overwrite = true;
  CHECK(build_corpus(again, dir / "corpus").records.size() == 25);
}

TEST_CASE("rebuilding with the same seed reproduces the images") {
  TempDir a("corpus"), b("corpus");
  const CorpusManifest ma = small_corpus(a);
  const CorpusManifest mb = small_corpus(b);
  for (std::size_t i = 0; i < ma.records.size(); ++i) {
    CHECK(read_png(ma.resolve(ma.records[i])) == read_png(mb.resolve(mb.records[i])));
  }
  CHECK(manifest_fingerprint(ma) == manifest_fingerprint(mb));
}

TEST_CASE("object split sizes") {
  const CorpusManifest full = synthetic_records(127, 5);
  const CorpusManifest s = split_by_object(full, 0.2, 1);
  std::set<std::uint64_t> val;
  for (const auto& r : s.records) {
    if (r.split == Split::kVal) val.insert(r.object_id);
  }
  CHECK(val.size() == 25);
  CHECK(full.object_ids().size() - val.size() == 102);

  const CorpusManifest five = split_by_object(synthetic_records(5, 5), 0.2, 1);
  CHECK(five.select(Split::kVal).size() == 5);
  CHECK(five.select(Split::kTrain).size() == 20);

  const CorpusManifest desk = split_by_object(synthetic_records(50, 40), 0.2, 0);
  std::set<std::uint64_t> desk_val;
  for (const auto* r : desk.select(Split::kVal)) desk_val.insert(r->object_id);
  CHECK(desk_val.size() == 10);
}

TEST_CASE("split is deterministic, object-disjoint and seed dependent") {
  const CorpusManifest m = synthetic_records(40, 10);
  const CorpusManifest a = split_by_object(m, 0.25, 7);
  const CorpusManifest b = split_by_object(m, 0.25, 7);
  CHECK(a.records == b.records);
  std::map<std::uint64_t, std::set<Split>> per_object;
  for (const auto& r : a.records) per_object[r.object_id].insert(r.split);
  for (const auto& [obj, s] : per_object) CHECK(s.size() == 1);
  const CorpusManifest c = split_by_object(m, 0.25, 8);
  CHECK_FALSE(a.records == c.records);
}

TEST_CASE("degenerate split fractions are rejected") {
  const CorpusManifest m = synthetic_records(5, 5);
  CHECK_THROWS_AS(split_by_object(m, 0.05, 0), ParameterError);
  CHECK_THROWS_AS(split_by_object(m, 0.95, 0), ParameterError);
  CHECK_THROWS_AS(split_by_object(m, 0.0, 0), ParameterError);
  CHECK_THROWS_AS(split_by_object(m, 1.0, 0), ParameterError);
}

TEST_CASE("verify_manifest reports constructed violations") {
  TempDir dir("corpus");
  CorpusManifest m = split_by_object(small_corpus(dir), 0.2, 0);
  CHECK(verify_manifest(m).empty());

  CorpusManifest flipped = m;
  auto& r = flipped.records[0];
  r.split = r.split == Split::kTrain ? Split::kVal : Split::kTrain;
  const auto issues = verify_manifest(flipped);
  REQUIRE_FALSE(issues.empty());
  const bool names_object = std::any_of(issues.begin(), issues.end(), [&](const std::string& s) {
    return s.find("object " + std::to_string(r.object_id) + " appears in both") != std::string::npos;
  });
  CHECK(names_object);

  std::filesystem::remove(m.resolve(m.records[3]));
  const auto missing = verify_manifest(m);
  REQUIRE(missing.size() == 1);
  CHECK(missing[0].find(m.records[3].image_path) != std::string::npos);

  CorpusManifest dup = m;
  dup.records[1].sample_id = dup.records[0].sample_id;
  CHECK_FALSE(verify_manifest(dup).empty());
}

TEST_CASE("manifest file round trip") {
  TempDir dir("corpus");
  const CorpusManifest m = split_by_object(small_corpus(dir), 0.2, 4);
  write_manifest(m, dir / "corpus" / "split.jsonl");
  const CorpusManifest back = read_manifest(dir / "corpus" / "split.jsonl");
  CHECK(back.records == m.records);
  CHECK(back.config == m.config);
  CHECK(back.root == m.root);
  CHECK(verify_manifest(back).empty());
  CHECK_THROWS_AS(read_manifest(dir / "none.jsonl"), IoError);
}

TEST_CASE("batch stream sizes, coverage and replay") {
  TempDir dir("corpus");
  const CorpusManifest m = small_corpus(dir);
  BatchStream s(m, Split::kTrain, 8, 5, 3);
  CHECK(s.num_batches() == 4);
  std::vector<std::size_t> sizes;
  std::multiset<std::string> ids;
  std::vector<std::string> order;
  Batch b;
  while (s.next(b)) {
    sizes.push_back(b.size());
    CHECK(b.images.shape == Shape{static_cast<int>(b.size()), 3, 32, 32});
    for (float v : b.images.data) REQUIRE((v >= 0.0f && v <= 1.0f));
    for (const auto* r : b.records) {
      ids.insert(r->sample_id);
      order.push_back(r->sample_id);
    }
  }
  CHECK(sizes == std::vector<std::size_t>{8, 8, 8, 1});
  std::multiset<std::string> expected;
  for (const auto& r : m.records) expected.insert(r.sample_id);
  CHECK(ids == expected);

  ImageCache cache;
  BatchStream replay(m, Split::kTrain, 8, 5, 3, true, &cache);
  std::vector<std::string> order2;
  Batch b2;
  while (replay.next(b2)) {
    for (const auto* r : b2.records) order2.push_back(r->sample_id);
  }
  CHECK(order == order2);

  BatchStream other(m, Split::kTrain, 8, 5, 4);
  std::vector<std::string> order3;
  while (other.next(b2)) {
    for (const auto* r : b2.records) order3.push_back(r->sample_id);
  }
  CHECK(order != order3);
  CHECK_THROWS_AS(BatchStream(m, Split::kTrain, 0, 1, 1), ParameterError);
}

TEST_CASE("decode failures name the sample") {
  TempDir dir("corpus");
  const CorpusManifest m = small_corpus(dir);
  std::ofstream(m.resolve(m.records[2]), std::ios::trunc) << "garbage";
  BatchStream s(m, Split::kTrain, 25, 0, 0, false);
  Batch b;
  try {
    s.next(b);
    FAIL("expected a decode error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(m.records[2].sample_id) != std::string::npos);
  }
}

TEST_CASE("pixel scaling divides by 255") {
  Image img(2, 1);
  img.set(0, 0, {255, 0, 51});
  img.set(1, 0, {0, 102, 255});
  const Tensor<float> t = images_to_tensor({&img});
  CHECK(t.shape == Shape{1, 3, 1, 2});
  CHECK(t.data == AlignedVector<float>{1.0f, 0.0f, 0.0f, 0.4f, 0.2f, 1.0f});
}

}  // TEST_SUITE
