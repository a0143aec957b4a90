#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "spikenas/dataset.hpp"
#include "testutil.hpp"

using namespace spikenas;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("synthetic generator: determinism and uniform labels") {
    auto a = synthetic_gen(4, 25, 16, 0.2, 7);
    auto b = synthetic_gen(4, 25, 16, 0.2, 7);
    CHECK(a.pixels == b.pixels);
    CHECK(a.labels == b.labels);
    auto c = synthetic_gen(4, 25, 16, 0.2, 8);
    CHECK(a.pixels != c.pixels);

    std::vector<int> hist(4, 0);
    for (auto l : a.labels) hist[l]++;
    for (int h : hist) CHECK(h == 25);
    CHECK_THROWS_AS(synthetic_gen(4, 10, 4, 0.0, 1), ShapeError);  // size >= 8
}

TEST_CASE("synthetic generator: nearest centroid is perfect at zero noise") {
    auto ds = synthetic_gen(6, 10, 16, 0.0, 3);
    // centroids from the first sample of each class (noise-free: identical
    // within a class)
    std::vector<std::vector<double>> centroid(6);
    for (dim_t i = 0; i < ds.count; ++i) {
        const int c = ds.labels[std::size_t(i)];
        if (!centroid[std::size_t(c)].empty()) continue;
        centroid[std::size_t(c)].assign(ds.pixels.begin() + i * dim_t(ds.pixels_per_image()),
                                        ds.pixels.begin() + (i + 1) * dim_t(ds.pixels_per_image()));
    }
    std::size_t correct = 0;
    for (dim_t i = 0; i < ds.count; ++i) {
        double best = 1e300;
        int arg = -1;
        for (int c = 0; c < 6; ++c) {
            double d2 = 0;
            for (std::size_t j = 0; j < ds.pixels_per_image(); ++j) {
                const double d = double(ds.pixels[std::size_t(i) * ds.pixels_per_image() + j]) -
                                 centroid[std::size_t(c)][j];
                d2 += d * d;
            }
            if (d2 < best) {
                best = d2;
                arg = c;
            }
        }
        correct += (arg == ds.labels[std::size_t(i)]);
    }
    CHECK(correct == std::size_t(ds.count));
}

TEST_CASE("raw binary round trip is byte exact") {
    auto ds = synthetic_gen(3, 7, 8, 0.1, 11);
    const std::string path = tmp_path("ds_roundtrip.ssds");
    save_dataset(ds, path, DatasetFormat::raw_binary);
    auto back = load_dataset(path, DatasetFormat::raw_binary);
    CHECK(back.pixels == ds.pixels);
    CHECK(back.labels == ds.labels);
    CHECK(back.classes == 3);
    CHECK(back.height == 8);

    // save again: byte-identical file
    const std::string path2 = tmp_path("ds_roundtrip2.ssds");
    save_dataset(back, path2, DatasetFormat::raw_binary);
    CHECK(slurp(path) == slurp(path2));
    fs::remove(path);
    fs::remove(path2);
}

TEST_CASE("raw binary: truncation and bad labels are named errors") {
    auto ds = synthetic_gen(3, 4, 8, 0.0, 1);
    const std::string path = tmp_path("ds_trunc.ssds");
    save_dataset(ds, path, DatasetFormat::raw_binary);
    std::string bytes = slurp(path);

    // truncate the pixel section
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), std::streamsize(bytes.size() - 10));
    f.close();
    try {
        load_dataset(path, DatasetFormat::raw_binary);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("truncated pixel section") != std::string::npos);
        CHECK(std::string(e.what()).find("expected") != std::string::npos);
    }

    // bad magic
    std::string corrupt = bytes;
    corrupt[0] = 'X';
    std::ofstream g(path, std::ios::binary | std::ios::trunc);
    g.write(corrupt.data(), std::streamsize(corrupt.size()));
    g.close();
    CHECK_THROWS_AS(load_dataset(path, DatasetFormat::raw_binary), IoError);

    // label out of range: classes=3, patch a label byte to 9
    corrupt = bytes;
    corrupt[18] = 9;
    std::ofstream h(path, std::ios::binary | std::ios::trunc);
    h.write(corrupt.data(), std::streamsize(corrupt.size()));
    h.close();
    try {
        load_dataset(path, DatasetFormat::raw_binary);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("label 9 at index 0") != std::string::npos);
    }
    fs::remove(path);
}

TEST_CASE("csv round trip") {
    auto ds = synthetic_gen(2, 3, 8, 0.0, 5);
    const std::string path = tmp_path("ds.csv");
    save_dataset(ds, path, DatasetFormat::csv);
    auto back = load_dataset(path, DatasetFormat::csv);
    CHECK(back.pixels == ds.pixels);
    CHECK(back.labels == ds.labels);
    fs::remove(path);
}

TEST_CASE("split: exact ratios, partition, stratification, determinism") {
    auto ds = synthetic_gen(4, 25, 8, 0.1, 2);  // 100 samples
    SplitPlan plan;
    plan.stage = SplitPlan::Stage::search;
    plan.seed = 9;
    auto [a, b] = split_indices(ds, plan);
    CHECK(a.size() == 50);
    CHECK(b.size() == 50);

    std::set<dim_t> seen(a.begin(), a.end());
    seen.insert(b.begin(), b.end());
    CHECK(seen.size() == 100);  // disjoint and exhaustive

    // stratified: each class within one sample of its proportion
    std::vector<int> ca(4, 0);
    for (dim_t i : a) ca[ds.labels[std::size_t(i)]]++;
    for (int c : ca) CHECK(std::abs(c - 12.5) <= 1.0);

    auto [a2, b2] = split_indices(ds, plan);
    CHECK(a == a2);
    CHECK(b == b2);
    SplitPlan plan2 = plan;
    plan2.seed = 10;
    auto [a3, b3] = split_indices(ds, plan2);
    CHECK(a != a3);

    // 120 samples at 5:1 -> 100/20
    auto ds120 = synthetic_gen(4, 30, 8, 0.1, 2);
    SplitPlan retrain;
    retrain.stage = SplitPlan::Stage::retrain;
    retrain.seed = 1;
    auto [t, v] = split_indices(ds120, retrain);
    CHECK(t.size() == 100);
    CHECK(v.size() == 20);
}

TEST_CASE("normalize: rescale, recovery, channel independence") {
    auto ds = synthetic_gen(2, 5, 8, 0.2, 13);
    ChannelStats stats;
    stats.mean = {0.0, 0.0, 0.0};
    stats.stddev = {1.0, 1.0, 1.0};
    std::vector<dim_t> all(std::size_t(ds.count));
    for (dim_t i = 0; i < ds.count; ++i) all[std::size_t(i)] = i;
    auto t = normalize_images<double>(ds, all, stats);
    CHECK(t.shape() == Shape5{ds.count, 3, 8, 8, 1});
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t.data()[i] >= 0.0);
        CHECK(t.data()[i] <= 1.0);
    }

    // denormalize recovers pixels within 1e-6
    ChannelStats real = compute_channel_stats(ds);
    auto tn = normalize_images<double>(ds, all, real);
    for (dim_t i = 0; i < 10; ++i) {
        const double v = tn.at(i, 1, 3, 4, 0);
        const double pix = (v * real.stddev[1] + real.mean[1]) * 255.0;
        CHECK(std::abs(pix - double(ds.pixels[std::size_t(
                                 i * dim_t(ds.pixels_per_image()) + 64 + 3 * 8 + 4)])) < 1e-6);
    }

    ChannelStats zero = real;
    zero.stddev[2] = 0.0;
    CHECK_THROWS_AS(normalize_images<double>(ds, all, zero), ShapeError);
}

TEST_CASE("stats sidecar round trip") {
    ChannelStats s;
    s.mean = {0.1234567890123, 0.5, 0.25};
    s.stddev = {0.9, 0.125, 0.33333333333333331};
    const std::string path = tmp_path("stats.txt");
    save_stats(s, path);
    auto back = load_stats(path);
    CHECK(back.mean == s.mean);
    CHECK(back.stddev == s.stddev);
    fs::remove(path);
}

TEST_CASE("batch stream: deterministic epochs, full coverage") {
    auto ds = synthetic_gen(4, 10, 8, 0.1, 3);
    ChannelStats stats = compute_channel_stats(ds);
    BatchStream<double> stream(ds, stats, 16, 42, true);
    CHECK(stream.batches_per_epoch() == 3);  // 40 images: 16+16+8

    auto b0 = stream.get(1, 0);
    auto b0_again = stream.get(1, 0);
    CHECK(b0.labels == b0_again.labels);
    CHECK(testutil::max_abs_diff(b0.images, b0_again.images) == 0.0);

    // an epoch covers every image exactly once
    std::vector<int> label_count(4, 0);
    dim_t total = 0;
    for (dim_t i = 0; i < stream.batches_per_epoch(); ++i) {
        auto b = stream.get(2, i);
        total += b.images.shape().n;
        for (int l : b.labels) label_count[std::size_t(l)]++;
    }
    CHECK(total == 40);
    for (int c : label_count) CHECK(c == 10);
}
