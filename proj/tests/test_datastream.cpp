#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lure/errors.hpp"
#include "lure/stream.hpp"
#include "test_util.hpp"

using namespace lure;
using namespace lure::testutil;

namespace {

Dataset tiny_labeled(std::size_t n, int classes, std::uint64_t seed) {
    Rng rng(seed);
    return random_batch(n, 2, classes, rng);
}

} // namespace

TEST_CASE("make_stream: 50000 samples over 8 mega-batches, 10% validation") {
    Rng rng(1);
    const Dataset source = tiny_labeled(50000, 10, 2);
    const Dataset test = tiny_labeled(100, 10, 3);
    const MegaBatchStream stream = make_stream(source, 8, 0.1, test, rng);
    REQUIRE(stream.length() == 8);
    for (std::size_t i = 1; i <= 8; ++i) {
        CHECK(stream.at(i).train.size() + stream.at(i).val.size() == 6250);
        CHECK(stream.at(i).train.size() == 5625);
        CHECK(stream.at(i).val.size() == 625);
    }
}

TEST_CASE("make_stream: t=1 keeps the whole training set in one mega-batch") {
    Rng rng(2);
    const Dataset source = tiny_labeled(100, 3, 4);
    const MegaBatchStream stream = make_stream(source, 1, 0.1, tiny_labeled(10, 3, 5), rng);
    REQUIRE(stream.length() == 1);
    CHECK(stream.at(1).train.size() + stream.at(1).val.size() == 100);
}

TEST_CASE("make_stream: remainder spreads one sample each over the first batches") {
    Rng rng(3);
    const Dataset source = tiny_labeled(103, 2, 6);
    const MegaBatchStream stream = make_stream(source, 4, 0.2, tiny_labeled(8, 2, 7), rng);
    std::vector<std::size_t> sizes;
    for (std::size_t i = 1; i <= 4; ++i) {
        sizes.push_back(stream.at(i).train.size() + stream.at(i).val.size());
    }
    CHECK(sizes == std::vector<std::size_t>{26, 26, 26, 25});
}

TEST_CASE("make_stream: partition property and disjoint index sets") {
    Rng rng(4);
    const Dataset source = tiny_labeled(237, 4, 8);
    const MegaBatchStream stream = make_stream(source, 5, 0.15, tiny_labeled(10, 4, 9), rng);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& mb : stream.mega_batches) {
        for (std::size_t idx : mb.train_indices) {
            CHECK(seen.insert(idx).second); // no duplicates anywhere
            ++total;
        }
        for (std::size_t idx : mb.val_indices) {
            CHECK(seen.insert(idx).second);
            ++total;
        }
    }
    CHECK(total == 237);
    CHECK(*seen.rbegin() == 236);
}

TEST_CASE("make_stream: deterministic under the same seed, rejects t > N") {
    const Dataset source = tiny_labeled(40, 2, 10);
    const Dataset test = tiny_labeled(5, 2, 11);
    Rng a(12), b(12);
    const MegaBatchStream s1 = make_stream(source, 4, 0.25, test, a);
    const MegaBatchStream s2 = make_stream(source, 4, 0.25, test, b);
    for (std::size_t i = 1; i <= 4; ++i) {
        CHECK(s1.at(i).train_indices == s2.at(i).train_indices);
        CHECK(s1.at(i).val_indices == s2.at(i).val_indices);
    }
    Rng c(13);
    CHECK_THROWS_AS(make_stream(tiny_labeled(3, 2, 14), 4, 0.25, test, c), InputError);
}

TEST_CASE("assemble_training_set: full replay accumulates train splits") {
    Rng rng(20);
    const Dataset source = tiny_labeled(400, 2, 21); // 4 mega-batches of 100, train 90
    const MegaBatchStream stream = make_stream(source, 4, 0.1, tiny_labeled(10, 2, 22), rng);
    const ReplayBuffer none;
    CHECK(assemble_training_set(stream, 3, ReplayPolicy::full(), none).size() == 270);
    CHECK(assemble_training_set(stream, 1, ReplayPolicy::full(), none).size() == 90);
    // NoReplay is exactly the i-th train split
    for (std::size_t i = 1; i <= 4; ++i) {
        const Dataset got = assemble_training_set(stream, i, ReplayPolicy::none(), none);
        CHECK(got.inputs.data == stream.at(i).train.inputs.data);
        CHECK(got.labels == stream.at(i).train.labels);
    }
}

TEST_CASE("assemble_training_set: buffered replay joins current train and buffer") {
    Rng rng(30);
    const Dataset source = tiny_labeled(400, 2, 31);
    const MegaBatchStream stream = make_stream(source, 4, 0.1, tiny_labeled(10, 2, 32), rng);
    ReplayBuffer buffer(186, 2);
    Rng buf_rng(33);
    buffer.update(stream.at(1).train, 1, buf_rng);
    CHECK(buffer.size() == std::min<std::size_t>(186, 90));
    const Dataset joined = assemble_training_set(stream, 2, ReplayPolicy::buffered(186), buffer);
    CHECK(joined.size() == 90 + std::min<std::size_t>(186, 90));
    // buffer holds only samples from strictly earlier mega-batches
    for (std::size_t origin : buffer.provenance()) CHECK(origin == 1);
}

TEST_CASE("update_buffer: keeps everything until quotas bind, balances classes") {
    // capacity >= total past samples -> everything retained
    Rng rng(40);
    ReplayBuffer big(1000, 2);
    const Dataset past = tiny_labeled(60, 2, 41);
    big.update(past, 1, rng);
    CHECK(big.size() == 60);

    // capacity 10, balanced 2-class data -> 5 per class
    ReplayBuffer small(10, 2);
    Dataset balanced;
    balanced.class_count = 2;
    balanced.inputs = Tensor::zeros({40, 2});
    balanced.labels.resize(40);
    for (std::size_t i = 0; i < 40; ++i) balanced.labels[i] = static_cast<int>(i % 2);
    Rng rng2(42);
    small.update(balanced, 1, rng2);
    CHECK(small.size() == 10);
    const Dataset contents = small.contents();
    const auto zeros = std::count(contents.labels.begin(), contents.labels.end(), 0);
    CHECK(zeros == 5);
}

TEST_CASE("update_buffer: provenance counts match an independent reservoir simulation") {
    const std::size_t capacity = 12;
    const int classes = 3;
    ReplayBuffer buffer(capacity, classes);
    Rng rng(50);

    // Independent simulation of the same per-class Algorithm R over the same
    // draw sequence, tracking only sample origins.
    Rng sim_rng(50);
    std::vector<std::vector<std::size_t>> sim(classes);
    std::vector<std::size_t> seen(classes, 0);
    auto quota = [&](std::size_t c) {
        return capacity / classes + (c < capacity % classes ? 1 : 0);
    };

    for (std::size_t mb = 1; mb <= 3; ++mb) {
        const Dataset data = tiny_labeled(50, classes, 100 + mb);
        buffer.update(data, mb, rng);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto c = static_cast<std::size_t>(data.labels[i]);
            seen[c] += 1;
            if (sim[c].size() < quota(c)) {
                sim[c].push_back(mb);
            } else {
                const std::size_t r = sim_rng.uniform_index(seen[c]);
                if (r < quota(c)) sim[c][r] = mb;
            }
        }
    }
    std::map<std::size_t, std::size_t> want, got;
    for (const auto& cls : sim) {
        for (std::size_t origin : cls) ++want[origin];
    }
    for (std::size_t origin : buffer.provenance()) ++got[origin];
    CHECK(got == want);
    CHECK(buffer.size() == capacity);
}

TEST_CASE("corrupt_labels: identity at rate 0, binomial stats at higher rates") {
    const Dataset data = tiny_labeled(1000, 10, 60);
    Rng rng(61);
    const Dataset same = corrupt_labels(data, 0.0, rng);
    CHECK(same.labels == data.labels);
    CHECK(same.inputs.data == data.inputs.data);

    // rate 1, C = 2: changed fraction ~ 1/2
    const Dataset two = tiny_labeled(100000, 2, 62);
    Rng rng2(63);
    const Dataset flipped = corrupt_labels(two, 1.0, rng2);
    CHECK(flipped.inputs.data == two.inputs.data);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < two.size(); ++i) changed += flipped.labels[i] != two.labels[i];
    const double n = static_cast<double>(two.size());
    double p = 0.5;
    CHECK(std::abs(changed / n - p) < 3.0 * std::sqrt(p * (1 - p) / n));

    // rate 0.2, C = 10: changed fraction ~ 0.2 * 9/10 = 0.18
    const Dataset ten = tiny_labeled(100000, 10, 64);
    Rng rng3(65);
    const Dataset noisy = corrupt_labels(ten, 0.2, rng3);
    changed = 0;
    for (std::size_t i = 0; i < ten.size(); ++i) changed += noisy.labels[i] != ten.labels[i];
    p = 0.2 * 9.0 / 10.0;
    CHECK(std::abs(changed / n - p) < 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("cap_per_class: exact per-class counts") {
    const Dataset data = tiny_labeled(500, 5, 70);
    std::map<int, std::size_t> before;
    for (int y : data.labels) ++before[y];

    Rng rng(71);
    const Dataset capped = cap_per_class(data, 30, rng);
    std::map<int, std::size_t> after;
    for (int y : capped.labels) ++after[y];
    for (const auto& [cls, count] : before) {
        CHECK(after[cls] == std::min<std::size_t>(30, count));
    }

    // no-op cap keeps the dataset exactly (order preserved by construction)
    Rng rng2(72);
    const Dataset whole = cap_per_class(data, 10000, rng2);
    CHECK(whole.labels == data.labels);
    CHECK(whole.inputs.data == data.inputs.data);

    // small case: class with 5 samples capped to 3
    Dataset mini;
    mini.class_count = 2;
    mini.inputs = Tensor::zeros({7, 2});
    mini.labels = {0, 0, 0, 0, 0, 1, 1};
    Rng rng3(73);
    const Dataset cut = cap_per_class(mini, 3, rng3);
    CHECK(std::count(cut.labels.begin(), cut.labels.end(), 0) == 3);
    CHECK(std::count(cut.labels.begin(), cut.labels.end(), 1) == 2);
}

TEST_CASE("cap_per_class: 14 classes capped at 270 bounds the total") {
    const Dataset data = tiny_labeled(10000, 14, 74);
    Rng rng(75);
    const Dataset capped = cap_per_class(data, 270, rng);
    CHECK(capped.size() <= 14 * 270);
}

TEST_CASE("sample_subset: fraction, count, identity, and bounds") {
    const Dataset data = tiny_labeled(5625, 4, 80);
    Rng rng(81);
    CHECK(sample_subset(data, SubsetSpec{0.2, 0}, rng).size() == 1125);
    CHECK(sample_subset(data, SubsetSpec{0.0, 128}, rng).size() == 128);
    const Dataset all = sample_subset(data, SubsetSpec{1.0, 0}, rng);
    CHECK(all.size() == data.size());
    CHECK_THROWS_AS(sample_subset(data, SubsetSpec{0.0, 6000}, rng), InputError);
}

TEST_CASE("synth_blobs: class balance and chance level at zero separation") {
    Rng rng(90);
    const Dataset blobs = synth_blobs(4, 100, 8, 0.0, rng);
    CHECK(blobs.size() == 400);
    for (int c = 0; c < 4; ++c) {
        CHECK(std::count(blobs.labels.begin(), blobs.labels.end(), c) == 100);
    }
    // zero separation: all class means coincide at the origin
    std::vector<double> mean(8, 0.0);
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        for (std::size_t j = 0; j < 8; ++j) mean[j] += blobs.inputs.at(i, j);
    }
    for (double& v : mean) v /= 400.0;
    for (double v : mean) CHECK(std::abs(v) < 0.3);
}

TEST_CASE("synth_blobs: wide separation is solved by a nearest-mean oracle") {
    Rng rng(91);
    const Dataset train = synth_blobs(3, 400, 2, 20.0, rng);
    const Dataset fresh = synth_blobs(3, 400, 2, 20.0, rng);

    std::vector<std::vector<double>> means(3, std::vector<double>(2, 0.0));
    std::vector<std::size_t> counts(3, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto c = static_cast<std::size_t>(train.labels[i]);
        ++counts[c];
        for (std::size_t j = 0; j < 2; ++j) means[c][j] += train.inputs.at(i, j);
    }
    for (std::size_t c = 0; c < 3; ++c) {
        for (double& v : means[c]) v /= static_cast<double>(counts[c]);
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < fresh.size(); ++i) {
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t c = 0; c < 3; ++c) {
            double d = 0.0;
            for (std::size_t j = 0; j < 2; ++j) {
                const double diff = fresh.inputs.at(i, j) - means[c][j];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        correct += static_cast<int>(best) == fresh.labels[i];
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(fresh.size()) > 0.999);
}

TEST_CASE("synth_blobs: simplex means have equal pairwise distances") {
    // Empirical class means of a large draw approximate the true means.
    Rng rng(92);
    const std::size_t dim = 5;
    const Dataset blobs = synth_blobs(5, 4000, dim, 10.0, rng);
    std::vector<std::vector<double>> means(5, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(5, 0);
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        const auto c = static_cast<std::size_t>(blobs.labels[i]);
        ++counts[c];
        for (std::size_t j = 0; j < dim; ++j) means[c][j] += blobs.inputs.at(i, j);
    }
    for (std::size_t c = 0; c < 5; ++c) {
        for (double& v : means[c]) v /= static_cast<double>(counts[c]);
    }
    for (std::size_t a = 0; a < 5; ++a) {
        for (std::size_t b = a + 1; b < 5; ++b) {
            double d = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double diff = means[a][j] - means[b][j];
                d += diff * diff;
            }
            CHECK(std::sqrt(d) == doctest::Approx(10.0).epsilon(0.05));
        }
    }
    Rng rng2(93);
    CHECK_THROWS_AS(synth_blobs(10, 5, 4, 1.0, rng2), InputError);
}

TEST_CASE("stream manifest lists every index set") {
    Rng rng(95);
    const Dataset source = tiny_labeled(60, 2, 96);
    const MegaBatchStream stream = make_stream(source, 3, 0.2, tiny_labeled(6, 2, 97), rng);
    const std::string json_text = stream_manifest_json(stream, source.size());
    CHECK(json_text.find("\"megabatches\"") != std::string::npos);
    CHECK(json_text.find("\"source_size\": 60") != std::string::npos);
}
