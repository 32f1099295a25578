#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "rebalance/classifier.hpp"
#include "test_support.hpp"

using namespace rebalance;

namespace {

Corpus separable() {
  return Corpus({{"a", "good good", Label::Positive, std::nullopt},
                 {"b", "bad bad", Label::Negative, std::nullopt}});
}

LinearModel unit_model(double w, double b) {
  LinearModel m;
  m.weights = {w};
  m.bias = b;
  m.vocab_fingerprint = 7;
  return m;
}

SparseVector unit_doc(double weight) { return SparseVector({{0u, weight}}, 7); }

}  // namespace

TEST(Classifier, SeparablePairReachesFullAccuracy) {
  const auto corpus = separable();
  const auto vocab = fit_corpus_vocabulary(corpus);
  TrainConfig cfg;
  cfg.epochs = 200;
  for (LossKind loss : {LossKind::Logistic, LossKind::Hinge}) {
    cfg.loss = loss;
    const auto model = train(corpus, vocab, cfg);
    for (const auto& ex : corpus) {
      EXPECT_EQ(predict(model, vectorize(analyze(ex.text), vocab)), ex.label);
    }
    EXPECT_EQ(model.calibrated(), loss == LossKind::Logistic);
  }
}

TEST(Classifier, HugeRegularizationCollapsesWeights) {
  const auto corpus = rebalance::testing::make_corpus(30, 10);
  const auto vocab = fit_corpus_vocabulary(corpus);
  TrainConfig cfg;
  cfg.l2_lambda = 1e6;
  const auto model = train(corpus, vocab, cfg);
  double norm = 0.0;
  for (double w : model.weights) norm += w * w;
  EXPECT_LT(std::sqrt(norm), 1e-3);
  // Every prediction is decided by the bias alone.
  const Label bias_label = sigmoid(model.bias) >= 0.5 ? Label::Positive : Label::Negative;
  for (const auto& ex : corpus) EXPECT_EQ(predict(model, vectorize(analyze(ex.text), vocab)), bias_label);
}

TEST(Classifier, TrainingIsBitwiseDeterministic) {
  const auto corpus = rebalance::testing::make_corpus(40, 12);
  const auto vocab = fit_corpus_vocabulary(corpus);
  TrainConfig cfg;
  cfg.seed = 99;
  const auto a = train(corpus, vocab, cfg);
  const auto b = train(corpus, vocab, cfg);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
  cfg.seed = 100;
  const auto c = train(corpus, vocab, cfg);
  EXPECT_NE(a.weights, c.weights);
}

TEST(Classifier, RejectsSingleClassAndBadConfig) {
  const Corpus one({{"a", "good", Label::Positive, std::nullopt}});
  const auto vocab = fit_corpus_vocabulary(one);
  EXPECT_THROW(train(one, vocab, {}), SingleClassTrainingSet);
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg = {};
  cfg.decision_threshold = 1.0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
}

TEST(Classifier, DivergenceIsReported) {
  const auto corpus = separable();
  const auto vocab = fit_corpus_vocabulary(corpus);
  TrainConfig cfg;
  cfg.learning_rate = std::numeric_limits<double>::infinity();
  cfg.epochs = 3;
  EXPECT_THROW(train(corpus, vocab, cfg), NonFiniteLoss);
}

TEST(PredictProba, Values) {
  EXPECT_EQ(predict_proba(unit_model(0, 0), unit_doc(3.0)), 0.5);
  EXPECT_NEAR(predict_proba(unit_model(1, 0), unit_doc(1.0)), 0.7310585786300049, 1e-12);
  EXPECT_NEAR(predict_proba(unit_model(1e3, 0), unit_doc(1.0)), 1.0, 1e-15);
  EXPECT_GT(predict_proba(unit_model(-1e3, 0), unit_doc(1.0)), 0.0 - 1e-300);
  EXPECT_THROW(predict_proba(unit_model(1, 0), SparseVector({{0u, 1.0}}, 8)), VocabularyMismatch);
}

TEST(Predict, ThresholdBoundary) {
  const auto half = unit_model(0, 0);
  EXPECT_EQ(predict(half, unit_doc(1.0), 0.5), Label::Positive);
  // sigmoid(-0.04) ~= 0.49
  EXPECT_EQ(predict(unit_model(0, -0.04), unit_doc(1.0), 0.5), Label::Negative);
  EXPECT_EQ(predict(unit_model(-50, 0), unit_doc(1.0), 0.0), Label::Positive);
}

TEST(Predict, InvariantUnderMonotoneRecalibration) {
  // Cubing a centered score is strictly monotone and fixes 0.5, so thresholding
  // at 0.5 before or after it agrees.
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto m = unit_model(rng.normal() * 3, rng.normal());
    const auto doc = unit_doc(rng.uniform01() + 0.01);
    const double p = predict_proba(m, doc);
    const double q = 0.5 + 4 * std::pow(p - 0.5, 3);
    EXPECT_EQ(predict(m, doc, 0.5) == Label::Positive, q >= 0.5);
  }
}

TEST(Gradient, EmptyBatchIsRejected) {
  EXPECT_THROW(gradient(unit_model(0, 0), std::vector<FeatureRow>{}, 0.0), PreconditionError);
}

TEST(Gradient, SymmetricBalancedBatchHasZeroBiasGradient) {
  LinearModel m;
  m.weights.assign(2, 0.0);
  m.vocab_fingerprint = 7;
  const std::vector<FeatureRow> batch{
      {SparseVector({{0u, 0.6}, {1u, 0.8}}, 7), Label::Positive},
      {SparseVector({{0u, 0.8}, {1u, 0.6}}, 7), Label::Negative},
  };
  EXPECT_EQ(gradient(m, batch, 0.1).bias, 0.0);
}

TEST(Gradient, MatchesFiniteDifferences) {
  Rng rng(2024);
  for (LossKind loss : {LossKind::Logistic, LossKind::Hinge}) {
    for (int i = 0; i < 100; ++i) {
      const auto draw = oracle::random_draw(rng, loss);
      EXPECT_LE(oracle::gradient_relative_error(draw), 1e-5);
      EXPECT_NEAR(objective(draw.model, draw.batch, draw.l2_lambda),
                  oracle::dense_objective(loss, draw.model.weights, draw.model.bias, draw.dense,
                                          draw.l2_lambda),
                  1e-12);
    }
  }
}

TEST(Gradient, SmallStepDescentDecreasesObjective) {
  Rng rng(8);
  auto draw = oracle::random_draw(rng, LossKind::Logistic);
  draw.l2_lambda = 0.1;
  double prev = objective(draw.model, draw.batch, draw.l2_lambda);
  for (int step = 0; step < 50; ++step) {
    const auto g = gradient(draw.model, draw.batch, draw.l2_lambda);
    for (std::size_t j = 0; j < g.weights.size(); ++j) draw.model.weights[j] -= 0.05 * g.weights[j];
    draw.model.bias -= 0.05 * g.bias;
    const double cur = objective(draw.model, draw.batch, draw.l2_lambda);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(LinearModel, JsonRoundTrip) {
  const auto corpus = rebalance::testing::make_corpus(20, 8);
  const auto vocab = fit_corpus_vocabulary(corpus);
  TrainConfig cfg;
  cfg.loss = LossKind::Hinge;
  const auto model = train(corpus, vocab, cfg);
  const auto dir = rebalance::testing::scratch_dir("model");
  model.save(dir / "model.json");
  const auto back = LinearModel::load(dir / "model.json");
  EXPECT_EQ(back.weights, model.weights);
  EXPECT_EQ(back.bias, model.bias);
  EXPECT_EQ(back.loss, LossKind::Hinge);
  EXPECT_EQ(back.vocab_fingerprint, vocab.fingerprint());
  EXPECT_EQ(back.config.epochs, cfg.epochs);
  EXPECT_THROW(LinearModel::from_json({{"loss_kind", "logistic"}}), ConfigError);
}
