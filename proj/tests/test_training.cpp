/* Copyright 2026 The wsed Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "support.hpp"
#include "wsed/datagen.hpp"
#include "wsed/training.hpp"

namespace wsed {
namespace {

// Short synthetic clips, featurized in memory.
std::vector<TrainingClip> synthetic_clips(std::size_t n, std::uint64_t seed, double seconds = 2.0,
                                          std::size_t events = 1) {
  datagen::DatasetConfig dc;
  dc.clip_seconds = seconds;
  dc.events_per_clip = events;
  dc.seed = seed;
  dc.snr_db = {10.0};
  const auto classes = datagen::default_classes(dc.n_classes);
  const audio::FeatureExtractor fx(audio::FeatureConfig{});
  std::vector<TrainingClip> clips;
  for (std::size_t i = 0; i < n; ++i) {
    const auto mixed = datagen::mix_clip(datagen::random_recipe(dc, classes, i), classes, dc.sample_rate);
    clips.push_back({datagen::clip_name(i), int(i % 4), fx(mixed.mixture).log_mel, mixed.weak_labels});
  }
  return clips;
}

std::vector<std::string> labels(std::size_t k) {
  std::vector<std::string> out;
  for (const auto& c : datagen::default_classes(k)) out.push_back(c.name);
  return out;
}

Model make_model(const std::vector<TrainingClip>& clips, const TrainConfig& tc, std::size_t k = 4) {
  return init_model(clips, labels(k), audio::FeatureConfig{}, NetworkConfig{}, tc);
}

TEST(Batches, SizesAndCoverage) {
  std::vector<std::size_t> ids(10);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  const auto b = make_batches(ids, 4, 1, 0);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 4u);
  EXPECT_EQ(b[1].size(), 4u);
  EXPECT_EQ(b[2].size(), 2u);
  std::multiset<std::size_t> seen;
  for (const auto& batch : b) seen.insert(batch.begin(), batch.end());
  EXPECT_EQ(seen, std::multiset<std::size_t>(ids.begin(), ids.end()));
}

TEST(Batches, DeterministicPerSeedAndEpoch) {
  std::vector<std::size_t> ids(100);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  EXPECT_EQ(make_batches(ids, 24, 3, 5), make_batches(ids, 24, 3, 5));
  for (std::uint64_t e = 0; e < 20; ++e) {
    EXPECT_NE(make_batches(ids, 24, 3, e), make_batches(ids, 24, 3, e + 1));
    EXPECT_NE(make_batches(ids, 24, e, 0), make_batches(ids, 24, e + 1, 0));
  }
  EXPECT_THROW(make_batches(ids, 0, 0, 0), Error);
}

TEST(TrainConfigJson, RoundTrip) {
  TrainConfig c;
  c.batch_size = 7;
  c.lr = 0.002;
  c.epochs = 3;
  c.pooling = {pooling::Kind::kGap, 0.5};
  c.seed = 99;
  c.test_fold = 2;
  c.freeze_bn = true;
  c.bce.positive_term_only = true;
  const auto back = train_config_from_json(to_json_value(c));
  EXPECT_EQ(to_json_value(back), to_json_value(c));
}

TEST(TrainConfigJson, Validation) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(validate(c), Error);
  c = {};
  c.epochs = 0;
  EXPECT_THROW(validate(c), Error);
  c = {};
  c.pooling.r = 1.5;
  EXPECT_THROW(validate(c), Error);
}

TEST(Training, FirstBatchLossNearChance) {
  // Untrained sigmoid outputs sit near 0.5, so each of the K terms is
  // roughly ln 2.
  const auto clips = synthetic_clips(6, 1);
  TrainConfig tc;
  tc.epochs = 1;
  auto model = make_model(clips, tc);
  const auto res = train(model, clips);
  const double chance = 4 * std::log(2.0);
  EXPECT_GT(res.first_batch_loss, 0.75 * chance);
  EXPECT_LT(res.first_batch_loss, 1.25 * chance);
}

TEST(Training, OverfitsIdenticalClips) {
  auto clips = synthetic_clips(1, 2);
  clips.resize(8, clips.front());
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 1;
  tc.pooling = {pooling::Kind::kGwrp, 0.995};
  auto model = make_model(clips, tc);
  const auto res = train(model, clips);
  ASSERT_EQ(res.log.size(), 50u);
  EXPECT_EQ(model.epoch, 50u);
  // Pilot run: 0.067 after 400 steps at lr 0.001.
  EXPECT_LT(res.log.back().loss, 0.1);
  const auto p = predict_tags(model.masks(clips[0].log_mel), tc.pooling);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (clips[0].weak_labels[k]) {
      EXPECT_GT(p[k], 0.9);
    } else {
      EXPECT_LT(p[k], 0.1);
    }
  }
}

TEST(Training, SameSeedIsBitIdentical) {
  const auto clips = synthetic_clips(10, 3);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.seed = 17;
  auto a = make_model(clips, tc), b = make_model(clips, tc);
  const auto la = train(a, clips), lb = train(b, clips);
  for (std::size_t e = 0; e < 2; ++e) EXPECT_EQ(la.log[e].loss, lb.log[e].loss);
  EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));

  tc.seed = 18;
  auto c = make_model(clips, tc);
  train(c, clips);
  EXPECT_NE(encode_checkpoint(a), encode_checkpoint(c));
}

// One exact step on a single clip with frozen batch norm moves the
// probability toward the label.
TEST(Training, SingleStepMovesProbabilityTowardLabel) {
  const auto clips = synthetic_clips(4, 4);
  for (int label : {0, 1}) {
    for (const auto& base : clips) {
      TrainingClip clip = base;
      clip.weak_labels = {label};
      TrainConfig tc;
      tc.freeze_bn = true;
      tc.batch_size = 1;
      tc.lr = 1e-3;
      tc.pooling = {pooling::Kind::kGwrp, 0.995};
      auto model = init_model({clip}, {"x"}, audio::FeatureConfig{}, NetworkConfig{}, tc);
      const double before = predict_tags(model.masks(clip.log_mel), tc.pooling)[0];
      train_step(model, {&clip});
      const double after = predict_tags(model.masks(clip.log_mel), tc.pooling)[0];
      if (label == 1) {
        EXPECT_GE(after, before);
      } else {
        EXPECT_LE(after, before);
      }
    }
  }
}

TEST(Training, EmptyAndMismatchedInputs) {
  const auto clips = synthetic_clips(2, 5);
  TrainConfig tc;
  EXPECT_THROW(make_model({}, tc), Error);
  auto model = make_model(clips, tc);
  auto bad = clips;
  bad[0].weak_labels.push_back(0);
  try {
    train(model, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(Training, NonFiniteFeaturesAbort) {
  auto clips = synthetic_clips(2, 6);
  TrainConfig tc;
  auto model = make_model(clips, tc);
  clips[0].log_mel.values[3] = std::numeric_limits<double>::quiet_NaN();
  try {
    train_step(model, {&clips[0]});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  }
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    clips_ = synthetic_clips(6, 7);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 3;
    model_ = std::make_unique<Model>(make_model(clips_, tc));
    train(*model_, clips_);
    bytes_ = encode_checkpoint(*model_);
  }

  ErrorKind decode_error(const std::vector<std::uint8_t>& bytes) {
    try {
      decode_checkpoint(bytes, "test");
    } catch (const Error& e) {
      return e.kind();
    }
    ADD_FAILURE() << "decode succeeded";
    return ErrorKind::kInvalidArgument;
  }

  std::vector<TrainingClip> clips_;
  std::unique_ptr<Model> model_;
  std::vector<std::uint8_t> bytes_;
};

TEST_F(CheckpointTest, RoundTripIsBitIdentical) {
  auto back = decode_checkpoint(bytes_, "test");
  EXPECT_EQ(encode_checkpoint(back), bytes_);
  EXPECT_EQ(back.epoch, 1u);
  EXPECT_EQ(back.labels, model_->labels);
  EXPECT_EQ(back.adam.step_count, model_->adam.step_count);
  EXPECT_EQ(back.masks(clips_[0].log_mel).values, model_->masks(clips_[0].log_mel).values);
}

TEST_F(CheckpointTest, FileRoundTrip) {
  const auto dir = testing::temp_dir("ckpt");
  save_checkpoint(*model_, dir / "m.ckpt");
  auto back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(encode_checkpoint(back), bytes_);
  try {
    load_checkpoint(dir / "missing.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST_F(CheckpointTest, ResumedTrainingMatchesUninterrupted) {
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 3;
  auto straight = make_model(clips_, tc);
  train(straight, clips_);

  auto resumed = decode_checkpoint(bytes_, "test");
  resumed.train.epochs = 2;
  train(resumed, clips_);
  EXPECT_EQ(encode_checkpoint(resumed), encode_checkpoint(straight));
}

TEST_F(CheckpointTest, HeaderLayout) {
  EXPECT_EQ(std::string(bytes_.begin(), bytes_.begin() + 8), "WSEDCKPT");
  EXPECT_EQ(bytes_[8], 1);  // version, little-endian
  EXPECT_EQ(bytes_[9] | bytes_[10] | bytes_[11], 0);
}

TEST_F(CheckpointTest, CorruptMagic) {
  auto b = bytes_;
  b[0] = 'X';
  EXPECT_EQ(decode_error(b), ErrorKind::kFormat);
}

TEST_F(CheckpointTest, WrongVersion) {
  auto b = bytes_;
  b[8] = 9;
  EXPECT_EQ(decode_error(b), ErrorKind::kFormat);
}

TEST_F(CheckpointTest, Truncated) {
  for (std::size_t keep : {std::size_t{4}, std::size_t{14}, bytes_.size() / 2, bytes_.size() - 1}) {
    EXPECT_EQ(decode_error({bytes_.begin(), bytes_.begin() + std::ptrdiff_t(keep)}), ErrorKind::kFormat) << keep;
  }
}

TEST_F(CheckpointTest, ChecksumMismatch) {
  auto b = bytes_;
  b[b.size() - 10] ^= 0x40;  // inside the last float payload
  EXPECT_EQ(decode_error(b), ErrorKind::kFormat);
}

TEST_F(CheckpointTest, ShapeMismatchOnRestore) {
  NetworkConfig other = model_->network_config();
  other.n_classes = 3;
  SegmentationNet<float> net(other, 0);
  try {
    restore_network(net, io::decode_container(bytes_, "test"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

}  // namespace
}  // namespace wsed
