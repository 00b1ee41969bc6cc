#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ciat/adapters/model_view.hpp"
#include "ciat/adapters/param_count.hpp"
#include "grad_suite.hpp"

using namespace ciat;
using namespace ciat::adapters;
using model::ForwardTrace;
using model::ModelConfig;
using model::Transformer;

namespace {

const std::vector<AdapterMode> kPairModes{AdapterMode::ciat, AdapterMode::ciat_layer, AdapterMode::ciat_basic,
                                          AdapterMode::serial};
const std::vector<AdapterMode> kAllModes{AdapterMode::ciat,   AdapterMode::ciat_layer,  AdapterMode::ciat_basic,
                                         AdapterMode::serial, AdapterMode::mono_serial, AdapterMode::mono_parallel};

double rel(double a, double b) { return std::abs(a - b) / b; }

}  // namespace

TEST(Mode, ParseRoundTrip) {
  for (auto m : kAllModes) EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_THROW(parse_mode("bogus"), Error);
  EXPECT_TRUE(is_mono(AdapterMode::mono_parallel));
  EXPECT_TRUE(is_serial(AdapterMode::mono_serial));
  EXPECT_FALSE(is_serial(AdapterMode::ciat));
}

TEST(Config, Validation) {
  auto cfg = fixtures::tiny_config(10);
  EXPECT_EQ(AdapterConfig::for_mode(AdapterMode::ciat).resolved_bottleneck(cfg), 4u);
  EXPECT_THROW(AdapterConfig::for_mode(AdapterMode::ciat, 8).validate(cfg), Error);
  auto mono = AdapterConfig::for_mode(AdapterMode::mono_serial);
  mono.embedding_adapter = true;
  EXPECT_THROW(mono.validate(cfg), Error);
  auto ac = AdapterConfig::for_mode(AdapterMode::serial, 3);
  auto back = AdapterConfig::from_kv(ac.to_kv());
  EXPECT_EQ(back.mode, ac.mode);
  EXPECT_EQ(back.bottleneck, 3u);
  EXPECT_EQ(back.embedding_adapter, ac.embedding_adapter);
}

TEST(ParamCount, BigConfiguration) {
  const auto big = ModelConfig::big();
  const auto ciat = count_params(big, AdapterConfig::for_mode(AdapterMode::ciat));
  const auto serial = count_params(big, AdapterConfig::for_mode(AdapterMode::serial));
  EXPECT_LT(rel(ciat.base, 242e6), 0.01);
  EXPECT_LT(rel(serial.per_bank, 12.6e6), 0.02);
  EXPECT_LT(rel(ciat.per_bank, 27.3e6), 0.02);
}

TEST(ParamCount, SmallConfiguration) {
  const auto small = ModelConfig::small_iwslt();
  const auto bank = [&](AdapterMode m) { return count_params(small, AdapterConfig::for_mode(m, 128)); };
  EXPECT_LT(rel(bank(AdapterMode::ciat).base, 20e6), 0.02);
  EXPECT_LT(rel(bank(AdapterMode::ciat_basic).per_bank, 264e3), 0.02);
  EXPECT_LT(rel(bank(AdapterMode::ciat_layer).per_bank, 528e3), 0.02);
  EXPECT_LT(rel(bank(AdapterMode::ciat).per_bank, 660e3), 0.02);
  EXPECT_LT(rel(bank(AdapterMode::ciat).embedding_adapters, 132e3), 0.02);
  EXPECT_EQ(bank(AdapterMode::mono_parallel).per_bank_side * 2, bank(AdapterMode::mono_parallel).per_bank);
}

TEST(ParamCount, MatchesAllocatedBanks) {
  const auto cfg = fixtures::tiny_config(14, 3, 16, 4, 24);
  for (auto m : kAllModes) {
    const auto ac = AdapterConfig::for_mode(m, 5);
    AdapterBank<float> bank({"x"}, cfg, ac, 1);
    EXPECT_EQ(bank.params().scalar_count(), count_params(cfg, ac).per_bank) << to_string(m);
  }
}

TEST(Placement, PerMode) {
  const auto cfg = fixtures::tiny_config(10);
  auto count = [&](AdapterMode m) { return placements(cfg, AdapterConfig::for_mode(m)).size(); };
  EXPECT_EQ(count(AdapterMode::ciat_basic), 4u);  // one per block
  EXPECT_EQ(count(AdapterMode::ciat_layer), 8u);  // self-attn and ffn per layer
  EXPECT_EQ(count(AdapterMode::serial), 4u);
  for (const auto& p : placements(cfg, AdapterConfig::for_mode(AdapterMode::serial))) {
    EXPECT_EQ(p.composition, Composition::serial);
    EXPECT_TRUE(p.own_ln);
    EXPECT_EQ(p.site.kind, model::SiteKind::ffn);
  }
  for (const auto& p : placements(cfg, AdapterConfig::for_mode(AdapterMode::ciat)))
    EXPECT_EQ(p.composition, Composition::parallel);
}

TEST(Bank, InitialisationAndZeroUp) {
  const auto cfg = fixtures::tiny_config(10);
  AdapterBank<double> bank({"en-de"}, cfg, AdapterConfig::for_mode(AdapterMode::ciat), 3);
  for (const auto& [name, var] : bank.params().all())
    if (name.ends_with(".up.w") || name.ends_with(".up.b"))
      for (double v : var.value().data()) EXPECT_EQ(v, 0.0);
  const auto& down = bank.params().get("enc.0.ffn.down.w").value();
  double ss = 0;
  for (double v : down.data()) ss += v * v;
  EXPECT_NEAR(ss / down.numel(), 1.0 / cfg.d_model, 0.6 / cfg.d_model);
  EXPECT_NE(bank.embedding_unit(model::Side::decoder), nullptr);
}

TEST(Bank, SaveLoadRoundTrip) {
  const auto cfg = fixtures::tiny_config(10);
  AdapterBank<float> bank({"en-de"}, cfg, AdapterConfig::for_mode(AdapterMode::ciat_layer, 3), 3);
  std::mt19937_64 rng(1);
  fixtures::randomize_bank(bank, rng);
  const auto path = std::filesystem::temp_directory_path() / "ciat_bank.ckpt";
  bank.save(path);
  auto back = AdapterBank<float>::load(path);
  EXPECT_EQ(back.key(), bank.key());
  EXPECT_EQ(back.config().mode, AdapterMode::ciat_layer);
  EXPECT_EQ(back.config().bottleneck, 3u);
  EXPECT_EQ(back.params().fingerprints(), bank.params().fingerprints());
  std::filesystem::remove(path);
}

TEST(View, ZeroBankIsIdentityForEveryMode) {
  const auto cfg = fixtures::tiny_config(16);
  Transformer<double> base(cfg, 2);
  std::mt19937_64 rng(4);
  const auto batch = fixtures::random_batch(3, 5, 4, cfg.vocab_size, rng);
  const auto bare = base.forward_loss(batch).value();
  for (auto m : kPairModes) {
    AdapterBank<double> bank({"en-de"}, cfg, AdapterConfig::for_mode(m), 9);
    ModelView<double> view(base);
    view.plug(bank);
    EXPECT_TRUE(base.forward_loss(batch, view.options()).value().bit_identical(bare)) << to_string(m);
  }
  for (auto m : {AdapterMode::mono_serial, AdapterMode::mono_parallel}) {
    AdapterBank<double> en({"en"}, cfg, AdapterConfig::for_mode(m), 9), de({"de"}, cfg, AdapterConfig::for_mode(m), 10);
    ModelView<double> view(base);
    view.plug(en, de);
    EXPECT_EQ(view.plugged_key(), "en+de");
    EXPECT_TRUE(base.forward_loss(batch, view.options()).value().bit_identical(bare)) << to_string(m);
  }
}

TEST(View, NonZeroBankChangesOutputWithoutTouchingBase) {
  const auto cfg = fixtures::tiny_config(16);
  Transformer<double> base(cfg, 2);
  const auto before = base.params().fingerprints();
  std::mt19937_64 rng(4);
  const auto batch = fixtures::random_batch(2, 4, 4, cfg.vocab_size, rng);
  AdapterBank<double> bank({"en-de"}, cfg, AdapterConfig::for_mode(AdapterMode::ciat), 9);
  fixtures::randomize_bank(bank, rng);
  ModelView<double> view(base);
  view.plug(bank);
  EXPECT_NE(base.forward_loss(batch, view.options()).value().item(), base.forward_loss(batch).value().item());
  EXPECT_EQ(base.params().fingerprints(), before);
}

TEST(View, PlugAndUnplugRules) {
  const auto cfg = fixtures::tiny_config(16);
  Transformer<double> base(cfg, 2);
  AdapterBank<double> ende({"en-de"}, cfg, AdapterConfig::for_mode(AdapterMode::ciat), 1);
  AdapterBank<double> enfr({"en-fr"}, cfg, AdapterConfig::for_mode(AdapterMode::ciat), 2);
  ModelView<double> view(base);
  EXPECT_TRUE(view.check_pair({"en", "fr"}, true));
  view.plug(ende);
  EXPECT_TRUE(view.check_pair({"en", "de"}, true));
  EXPECT_FALSE(view.check_pair({"en", "fr"}, false));
  EXPECT_THROW(view.check_pair({"en", "fr"}, true), Error);
  EXPECT_THROW(view.unplug("en-fr"), Error);
  EXPECT_THROW(view.plug(enfr), Error);
  view.unplug("en-de");
  view.plug(enfr);
  EXPECT_EQ(view.plugged_key(), "en-fr");
  view.unplug("en-fr");
  EXPECT_FALSE(view.plugged());

  auto other = fixtures::tiny_config(16, 3);
  AdapterBank<double> wrong({"en-de"}, other, AdapterConfig::for_mode(AdapterMode::ciat), 1);
  EXPECT_THROW(view.plug(wrong), Error);
  AdapterBank<double> mono({"en"}, cfg, AdapterConfig::for_mode(AdapterMode::mono_serial), 1);
  EXPECT_THROW(view.plug(mono), Error);
  EXPECT_THROW(view.plug(ende, ende), Error);
}

TEST(View, ProvenanceParallelVersusSerial) {
  const auto cfg = fixtures::tiny_config(16);
  Transformer<double> base(cfg, 2);
  std::mt19937_64 rng(5);
  const auto batch = fixtures::random_batch(2, 4, 3, cfg.vocab_size, rng);
  for (auto m : kPairModes) {
    AdapterBank<double> bank({"en-de"}, cfg, AdapterConfig::for_mode(m), 3);
    fixtures::randomize_bank(bank, rng);
    ModelView<double> view(base);
    view.plug(bank);
    ForwardTrace<double> trace;
    (void)base.forward_loss(batch, view.options(&trace));
    std::size_t adapted = 0;
    for (const auto& r : trace.records) {
      if (!r.adapted) continue;
      ++adapted;
      const auto& expected = is_serial(m) ? r.base_output : r.input;
      EXPECT_TRUE(r.adapter_input.bit_identical(expected)) << to_string(m) << " " << r.site.name();
    }
    EXPECT_EQ(adapted, bank.placements().size()) << to_string(m);
  }
}

TEST(View, DisabledLayersFallBackToBase) {
  const auto cfg = fixtures::tiny_config(16);
  Transformer<double> base(cfg, 2);
  std::mt19937_64 rng(6);
  const auto batch = fixtures::random_batch(2, 4, 3, cfg.vocab_size, rng);
  AdapterBank<double> bank({"en-de"}, cfg, AdapterConfig::for_mode(AdapterMode::ciat), 3);
  fixtures::randomize_bank(bank, rng);
  ModelView<double> view(base);
  view.plug(bank);
  view.disable_layers(model::Side::encoder, 1, 2);
  view.disable_layers(model::Side::decoder, 1, 2);
  view.set_embedding_adapters_enabled(false);
  EXPECT_TRUE(base.forward_loss(batch, view.options()).value().bit_identical(base.forward_loss(batch).value()));
  EXPECT_THROW(view.disable_layers(model::Side::encoder, 2, 3), Error);
  view.enable_all_layers();
  view.set_embedding_adapters_enabled(true);
  EXPECT_FALSE(base.forward_loss(batch, view.options()).value().bit_identical(base.forward_loss(batch).value()));
}

TEST(View, EmbeddingAdapterComputesResidualDifference) {
  const auto cfg = fixtures::tiny_config(16);
  Transformer<double> base(cfg, 2);
  AdapterBank<double> bank({"en-de"}, cfg, AdapterConfig::for_mode(AdapterMode::ciat), 3);
  std::mt19937_64 rng(7);
  fixtures::randomize_bank(bank, rng);
  ModelView<double> view(base);
  view.plug(bank);
  const auto& table = base.params().get("enc.embed");
  auto adapted = view.embedding_table(model::Side::encoder, table, nullptr).value();
  const auto* unit = bank.embedding_unit(model::Side::encoder);
  auto g = unit->forward(table).value();
  for (std::size_t i = 0; i < adapted.numel(); ++i) EXPECT_DOUBLE_EQ(adapted[i], table.value()[i] - g[i]);
}

TEST(Gradients, AdapterPathsPerMode) {
  for (auto m : kPairModes) {
    auto r = fixtures::adapter_grad_check(m);
    EXPECT_LT(r.report.max_rel_err, 1e-6) << to_string(m) << " " << r.report.worst_param;
    EXPECT_TRUE(r.base_grads_absent) << to_string(m);
  }
}

TEST(Gradients, EmbeddingAdapter) { EXPECT_LT(fixtures::embedding_adapter_grad_check().max_rel_err, 1e-6); }
