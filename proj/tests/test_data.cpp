#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "segzsl/data.hpp"
#include "segzsl/error.hpp"
#include "segzsl/rng.hpp"
#include "test_util.hpp"

using namespace segzsl;
using segzsl::test::random_tensor;

namespace {

SyntheticSpec small_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.classes_seen = 4;
  spec.classes_unseen = 2;
  spec.feature_dim = 8;
  spec.attr_dim = 6;
  spec.per_class = 20;
  spec.noise_sigma = 0.1;
  spec.nuisance_dim = 2;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("container save/load round-trip is bit-exact") {
  auto [ds, truth] = gen_synthetic_benchmark(small_spec(1));
  const auto dir = test::temp_dir("container");
  ds.splits["gzsl"] = NamedSplit{{0, 1, 2}, {3, 4}};
  save_container(ds, dir);
  DatasetContainer loaded = load_container(dir);
  CHECK(test::tensors_equal(ds.x, loaded.x));
  CHECK(ds.labels == loaded.labels);
  CHECK(test::tensors_equal(ds.attrs, loaded.attrs));
  CHECK(ds.seen_classes == loaded.seen_classes);
  CHECK(ds.unseen_classes == loaded.unseen_classes);
  REQUIRE(loaded.splits.count("gzsl") == 1);
  CHECK(loaded.splits["gzsl"].train == std::vector<std::size_t>{0, 1, 2});
  std::filesystem::remove_all(dir);
}

TEST_CASE("container validation failures are loud and specific") {
  auto [ds, truth] = gen_synthetic_benchmark(small_spec(2));
  const auto dir = test::temp_dir("container_err");
  save_container(ds, dir);

  SUBCASE("feature file size mismatch") {
    // Drop one row's worth of bytes from the features file.
    const auto features = dir / "features";
    const auto size = std::filesystem::file_size(features);
    std::filesystem::resize_file(features,
                                 size - ds.feature_dim() * sizeof(float));
    try {
      load_container(dir);
      FAIL("expected size mismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::truncated_file);
      CHECK(std::string(e.what()).find("features") != std::string::npos);
    }
  }

  SUBCASE("label out of range names the row") {
    // Rewrite one label beyond the class count.
    const auto labels = dir / "labels";
    std::fstream f(labels,
                   std::ios::binary | std::ios::in | std::ios::out);
    const std::int32_t bad = static_cast<std::int32_t>(ds.num_classes());
    f.seekp(5 * sizeof(std::int32_t));
    f.write(reinterpret_cast<const char*>(&bad), sizeof(bad));
    f.close();
    try {
      load_container(dir);
      FAIL("expected label range error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::invalid_argument);
      CHECK(std::string(e.what()).find("row 5") != std::string::npos);
    }
  }

  SUBCASE("unknown schema version") {
    std::ofstream out(dir / "manifest");
    out << "{\"schema\": \"segzsl-ds/999\"}\n";
    out.close();
    try {
      load_container(dir);
      FAIL("expected schema error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::format_version);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("average_image_attributes") {
  SUBCASE("one image per class returns the rows") {
    Tensor rows({3, 2}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    std::vector<int> labels{0, 1, 2};
    Tensor out = average_image_attributes(rows, labels);
    CHECK(test::tensors_equal(out, rows));
  }
  SUBCASE("v and -v average to zero") {
    Tensor rows({2, 3}, {1.0, -2.0, 0.5, -1.0, 2.0, -0.5});
    std::vector<int> labels{0, 0};
    Tensor out = average_image_attributes(rows, labels);
    CHECK(test::grads_all_zero({out}));
  }
  SUBCASE("matches an independent summation oracle on a random case") {
    RngStream rng(31);
    const std::size_t n = 40, l = 5, c = 5;
    Tensor rows = random_tensor({n, l}, rng);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(i % c);  // every class occupied
    }
    Tensor got = average_image_attributes(rows, labels);

    // Oracle: accumulate per class separately.
    std::vector<std::vector<double>> acc(c, std::vector<double>(l, 0.0));
    std::vector<std::size_t> cnt(c, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++cnt[labels[i]];
      for (std::size_t j = 0; j < l; ++j) acc[labels[i]][j] += rows.at(i, j);
    }
    for (std::size_t y = 0; y < c; ++y) {
      for (std::size_t j = 0; j < l; ++j) {
        CHECK(got.at(y, j) ==
              doctest::Approx(acc[y][j] / cnt[y]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("empty class is an error") {
    Tensor rows({2, 2}, {1.0, 2.0, 3.0, 4.0});
    std::vector<int> labels{0, 2};  // class 1 missing
    CHECK_THROWS_AS(average_image_attributes(rows, labels), Error);
  }
}

TEST_CASE("standardize_features") {
  auto [ds, truth] = gen_synthetic_benchmark(small_spec(3));
  std::vector<std::size_t> all_rows(ds.num_examples());
  for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;

  SUBCASE("transformed fit rows have mean ~0 and the record inverts") {
    auto [out, tf] = standardize_features(ds, all_rows);
    const std::size_t d = ds.feature_dim();
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < out.num_examples(); ++i) {
        mean += out.x.at(i, j);
      }
      mean /= static_cast<double>(out.num_examples());
      CHECK(std::fabs(mean) < 1e-9);
    }
    // Applying the stored transform inverse reproduces the original.
    for (int probe = 0; probe < 20; ++probe) {
      const std::size_t i = probe * 7 % ds.num_examples();
      const std::size_t j = probe % d;
      CHECK(out.x.at(i, j) * tf.std[j] + tf.mean[j] ==
            doctest::Approx(ds.x.at(i, j)).epsilon(1e-12));
    }
  }

  SUBCASE("already standardized data yields a near-identity transform") {
    auto [once, tf1] = standardize_features(ds, all_rows);
    auto [twice, tf2] = standardize_features(once, all_rows);
    for (std::size_t j = 0; j < ds.feature_dim(); ++j) {
      CHECK(std::fabs(tf2.mean[j]) < 1e-9);
      CHECK(tf2.std[j] == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  SUBCASE("constant dimension is left unchanged") {
    DatasetContainer flat = ds;
    for (std::size_t i = 0; i < flat.num_examples(); ++i) {
      flat.x.at(i, 0) = 2.5;
    }
    auto [out, tf] = standardize_features(flat, all_rows);
    CHECK(tf.std[0] == 1.0);
    for (std::size_t i = 0; i < out.num_examples(); ++i) {
      CHECK(out.x.at(i, 0) == 0.0);  // centered but not scaled
    }
  }

  SUBCASE("empty fit set is an error") {
    std::vector<std::size_t> none;
    CHECK_THROWS_AS(standardize_features(ds, none), Error);
  }
}

TEST_CASE("synthetic benchmark construction") {
  SUBCASE("zero noise and zero nuisance rows equal class means exactly") {
    SyntheticSpec spec = small_spec(4);
    spec.noise_sigma = 0.0;
    spec.nuisance_dim = 0;
    auto [ds, truth] = gen_synthetic_benchmark(spec);
    for (std::size_t i = 0; i < ds.num_examples(); ++i) {
      const auto cls = static_cast<std::size_t>(ds.labels[i]);
      for (std::size_t j = 0; j < ds.feature_dim(); ++j) {
        CHECK(ds.x.at(i, j) == truth.class_means.at(cls, j));
      }
    }
  }

  SUBCASE("attribute rows are distinct") {
    auto [ds, truth] = gen_synthetic_benchmark(small_spec(5));
    std::set<std::vector<double>> rows;
    for (std::size_t c = 0; c < ds.num_classes(); ++c) {
      std::vector<double> row(ds.attr_dim());
      for (std::size_t j = 0; j < ds.attr_dim(); ++j) {
        row[j] = ds.attrs.at(c, j);
      }
      CHECK(rows.insert(row).second);
    }
  }

  SUBCASE("attr_dim too small to separate classes is an error") {
    SyntheticSpec spec = small_spec(6);
    spec.attr_dim = 2;  // only 4 distinct binary rows, 6 classes requested
    CHECK_THROWS_AS(gen_synthetic_benchmark(spec), Error);
  }

  SUBCASE("deterministic per seed, divergent across seeds") {
    auto [a, ta] = gen_synthetic_benchmark(small_spec(7));
    auto [b, tb] = gen_synthetic_benchmark(small_spec(7));
    CHECK(test::tensors_equal(a.x, b.x));
    CHECK(test::tensors_equal(ta.map, tb.map));
    auto [c, tc] = gen_synthetic_benchmark(small_spec(8));
    CHECK_FALSE(test::tensors_equal(a.x, c.x));
  }

  SUBCASE("empirical class means concentrate around W a_c") {
    SyntheticSpec spec = small_spec(9);
    spec.per_class = 1000;
    spec.nuisance_dim = 0;
    spec.noise_sigma = 0.2;
    auto [ds, truth] = gen_synthetic_benchmark(spec);
    const double bound =
        3.0 * spec.noise_sigma / std::sqrt(static_cast<double>(spec.per_class));
    std::size_t violations = 0;
    for (std::size_t c = 0; c < ds.num_classes(); ++c) {
      std::vector<double> mean(ds.feature_dim(), 0.0);
      for (std::size_t i = 0; i < ds.num_examples(); ++i) {
        if (static_cast<std::size_t>(ds.labels[i]) != c) continue;
        for (std::size_t j = 0; j < ds.feature_dim(); ++j) {
          mean[j] += ds.x.at(i, j);
        }
      }
      for (std::size_t j = 0; j < ds.feature_dim(); ++j) {
        mean[j] /= static_cast<double>(spec.per_class);
        if (std::fabs(mean[j] - truth.class_means.at(c, j)) > bound) {
          ++violations;
        }
      }
    }
    // 3-sigma misses are possible but rare: 48 coordinates, p ~ 0.0027.
    CHECK(violations <= 2);
  }

  SUBCASE("seen and unseen id ranges are disjoint by construction") {
    auto [ds, truth] = gen_synthetic_benchmark(small_spec(10));
    for (int s : ds.seen_classes) {
      for (int u : ds.unseen_classes) CHECK(s != u);
    }
  }
}

TEST_CASE("bayes oracle accuracy") {
  SUBCASE("zero noise gives 1.0") {
    SyntheticSpec spec = small_spec(11);
    spec.noise_sigma = 0.0;
    spec.nuisance_dim = 0;
    auto [ds, truth] = gen_synthetic_benchmark(spec);
    std::vector<std::size_t> rows(ds.num_examples());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    std::vector<int> space;
    for (std::size_t c = 0; c < ds.num_classes(); ++c) {
      space.push_back(static_cast<int>(c));
    }
    CHECK(bayes_oracle_accuracy(ds, truth, rows, space) == 1.0);
  }

  SUBCASE("single-class label space is trivially 1.0") {
    auto [ds, truth] = gen_synthetic_benchmark(small_spec(12));
    const std::vector<std::size_t> rows = ds.rows_of_classes(
        std::vector<int>{0});
    const std::vector<int> space{0};
    CHECK(bayes_oracle_accuracy(ds, truth, rows, space) == 1.0);
  }

  SUBCASE("matches exhaustive isotropic-likelihood evaluation") {
    SyntheticSpec spec = small_spec(13);
    spec.classes_seen = 2;
    spec.classes_unseen = 1;
    spec.per_class = 10;
    spec.noise_sigma = 0.4;
    spec.nuisance_dim = 0;
    auto [ds, truth] = gen_synthetic_benchmark(spec);
    std::vector<std::size_t> rows(ds.num_examples());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    std::vector<int> space{0, 1, 2};

    // Brute-force oracle: per-class accuracy of argmax_c N(x; mean_c, s^2 I),
    // evaluated through explicit log-likelihoods.
    std::map<int, std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t i : rows) {
      int best = -1;
      double best_ll = -1e300;
      for (int c : space) {
        double ll = 0.0;
        for (std::size_t j = 0; j < ds.feature_dim(); ++j) {
          const double dev =
              ds.x.at(i, j) -
              truth.class_means.at(static_cast<std::size_t>(c), j);
          ll -= dev * dev / (2.0 * spec.noise_sigma * spec.noise_sigma);
        }
        if (ll > best_ll) {
          best_ll = ll;
          best = c;
        }
      }
      auto& [correct, total] = counts[ds.labels[i]];
      ++total;
      if (best == ds.labels[i]) ++correct;
    }
    double brute = 0.0;
    for (auto& [cls, ct] : counts) {
      brute += static_cast<double>(ct.first) / static_cast<double>(ct.second);
    }
    brute /= static_cast<double>(counts.size());

    CHECK(bayes_oracle_accuracy(ds, truth, rows, space) ==
          doctest::Approx(brute));
  }

  SUBCASE("accuracy is non-increasing in noise at matched seeds") {
    double prev = 1.1;
    for (double sigma : {0.1, 0.8, 2.0}) {
      SyntheticSpec spec = small_spec(14);
      spec.noise_sigma = sigma;
      spec.nuisance_dim = 0;
      auto [ds, truth] = gen_synthetic_benchmark(spec);
      std::vector<std::size_t> rows(ds.num_examples());
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
      std::vector<int> space;
      for (std::size_t c = 0; c < ds.num_classes(); ++c) {
        space.push_back(static_cast<int>(c));
      }
      const double acc = bayes_oracle_accuracy(ds, truth, rows, space);
      CHECK(acc <= prev);
      prev = acc;
    }
  }

  SUBCASE("mismatched truth record is an error") {
    auto [ds, truth] = gen_synthetic_benchmark(small_spec(15));
    SyntheticTruth bad;
    bad.class_means = Tensor({2, 2});
    std::vector<std::size_t> rows{0};
    std::vector<int> space{0};
    CHECK_THROWS_AS(bayes_oracle_accuracy(ds, bad, rows, space), Error);
  }
}
