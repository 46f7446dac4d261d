// dsr/generator.cc

// Copyright 2026  The DSR Toolkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dsr/generator.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "dsr/serialize.h"
#include "dsr/synthcorpus.h"
#include "dsr/wav.h"

namespace dsr {

namespace {

constexpr char kGeneratorMagic[4] = {'G', 'E', 'N', '0'};
constexpr double kStdFloor = 1e-3;

void build_modules(GeneratorModel* m, uint64_t seed) {
  const GeneratorDims& d = m->dims;
  Rng rng(derive_seed(seed, "generator_init"));
  m->prompt_encoder = std::make_unique<PromptEncoder>(&m->params, "penc", d.latent, d.hidden,
                                                      d.prompt_heads, d.prompt_blocks, &rng);
  Config vc;
  vc.set("variance.kernel", std::to_string(d.variance_kernel));
  vc.set("variance.heads", std::to_string(d.variance_heads));
  vc.set("variance.pitch_bins", std::to_string(d.pitch_bins));
  m->adaptor = std::make_unique<VarianceAdaptor>(&m->params, "var", d.vocab, d.hidden,
                                                 d.hidden, vc, &rng);
  m->backbone = std::make_unique<DiffusionBackbone>(&m->params, "bb", d.latent, d.hidden,
                                                    d.hidden, d.diffusion_blocks,
                                                    d.diffusion_cycle, d.diffusion_heads, &rng);
}

Mat crop_rows(const Mat& x, int start, int count) {
  Mat out(count, x.cols);
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < x.cols; ++j) out.at(i, j) = x.at(start + i, j);
  return out;
}

// One preprocessed severity-0 utterance: everything training needs, with
// tokens / durations / pitch / whitened latents trimmed to a common frame
// count so teacher forcing lines up exactly.
struct TrainItem {
  std::vector<int> tokens;
  std::vector<int> durations;
  PitchContour pitch;
  Mat z0;             // frames x latent, whitened
  Mat prompt_frames;  // normalized quantized codec frames of this utterance
  std::string speaker;
};

// Cropped view of a TrainItem plus every forward cache needed to backprop
// through the conditioning stack.
struct StepItem {
  std::vector<int> tokens;
  std::vector<int> durations;
  PitchContour pitch;
  Mat z0;
  Mat prompt_in;

  PromptEncoder::Cache prompt_cache;
  Mat prompt_enc;
  Mat emb;
  VariancePredictor::Cache dur_cache;
  Mat dur_pred;
  Mat expanded;
  VariancePredictor::Cache pitch_cache;
  Mat pitch_pred;
  VarianceAdaptor::ConditionCache cond_cache;
  Mat cond;

  Mat dcond, dprompt;
};

// Picks a contiguous token span whose frames fit within max_frames (a lone
// oversized token is truncated), then copies the matching slices.
void crop_item(const TrainItem& it, int max_frames, Rng* rng, StepItem* out) {
  const int T = static_cast<int>(it.tokens.size());
  std::vector<int> prefix(T + 1, 0);
  for (int i = 0; i < T; ++i) prefix[i + 1] = prefix[i] + it.durations[i];
  int a = 0, b = T;
  if (prefix[T] > max_frames) {
    a = rng->uniform_int(0, T - 1);
    b = a;
    int total = 0;
    while (b < T && total + it.durations[b] <= max_frames) total += it.durations[b++];
    if (b == a) b = a + 1;  // single token larger than the crop window
  }
  out->tokens.assign(it.tokens.begin() + a, it.tokens.begin() + b);
  out->durations.assign(it.durations.begin() + a, it.durations.begin() + b);
  int frames = 0;
  for (int d : out->durations) frames += d;
  const int fs = prefix[a];
  if (frames > max_frames) {  // the truncated-lone-token case
    out->durations.back() -= frames - max_frames;
    frames = max_frames;
  }
  out->pitch.hz.assign(it.pitch.hz.begin() + fs, it.pitch.hz.begin() + fs + frames);
  out->pitch.voiced.assign(it.pitch.voiced.begin() + fs,
                           it.pitch.voiced.begin() + fs + frames);
  out->z0 = crop_rows(it.z0, fs, frames);
}

Mat crop_prompt(const Mat& frames, int max_frames, Rng* rng) {
  if (frames.rows <= max_frames) return frames;
  const int start = rng->uniform_int(0, frames.rows - max_frames);
  return crop_rows(frames, start, max_frames);
}

GeneratorDims dims_from_config(const Config& config, int vocab, int latent_dim) {
  GeneratorDims d;
  d.vocab = vocab;
  d.latent = latent_dim;
  d.hidden = config.get_int("model.hidden");
  d.prompt_blocks = config.get_int("prompt.blocks");
  d.prompt_heads = config.get_int("prompt.heads");
  d.variance_kernel = config.get_int("variance.kernel");
  d.variance_heads = config.get_int("variance.heads");
  d.pitch_bins = config.get_int("variance.pitch_bins");
  d.diffusion_blocks = config.get_int("diffusion.blocks");
  d.diffusion_cycle = config.get_int("diffusion.dilation_cycle");
  d.diffusion_heads = config.get_int("diffusion.heads");
  return d;
}

}  // namespace

std::unique_ptr<GeneratorModel> make_generator(const Config& config, int vocab,
                                               int latent_dim, const std::string& codec_id,
                                               uint64_t seed) {
  DSR_REQUIRE(vocab >= 1 && latent_dim >= 1,
              "make_generator: bad vocab " << vocab << " or latent dim " << latent_dim);
  auto m = std::make_unique<GeneratorModel>();
  m->dims = dims_from_config(config, vocab, latent_dim);
  m->schedule.beta_min = config.get_double("diffusion.beta_min");
  m->schedule.beta_max = config.get_double("diffusion.beta_max");
  m->t_min = config.get_double("diffusion.t_min");
  m->prompt_max_frames = config.get_int("speaker.prompt_max_frames");
  m->codec_id = codec_id;
  m->config_hash = config.hash();
  m->latent_mean.assign(latent_dim, 0.0);
  m->latent_std.assign(latent_dim, 1.0);
  build_modules(m.get(), seed);
  return m;
}

Mat whiten_latents(const GeneratorModel& model, const Mat& latents) {
  DSR_REQUIRE(latents.cols == model.dims.latent, "whiten_latents: " << latents.cols
                                                                    << " bands, model has "
                                                                    << model.dims.latent);
  Mat out(latents.rows, latents.cols);
  for (int i = 0; i < latents.rows; ++i)
    for (int j = 0; j < latents.cols; ++j)
      out.at(i, j) = (latents.at(i, j) - model.latent_mean[j]) / model.latent_std[j];
  return out;
}

Mat unwhiten_latents(const GeneratorModel& model, const Mat& latents) {
  DSR_REQUIRE(latents.cols == model.dims.latent, "unwhiten_latents: " << latents.cols
                                                                      << " bands, model has "
                                                                      << model.dims.latent);
  Mat out(latents.rows, latents.cols);
  for (int i = 0; i < latents.rows; ++i)
    for (int j = 0; j < latents.cols; ++j)
      out.at(i, j) = latents.at(i, j) * model.latent_std[j] + model.latent_mean[j];
  return out;
}

GeneratorOutput generate(const GeneratorModel& model, const std::vector<int>& tokens,
                         const CodecFrameSequence& prompt, const GenerateOptions& options,
                         Rng* rng) {
  DSR_REQUIRE(!tokens.empty(), "generate: empty token sequence");
  DSR_REQUIRE(prompt.frames.rows >= 1, "generate: empty prompt");
  DSR_REQUIRE(prompt.frames.cols == model.prompt_encoder->in_dim(),
              "generate: prompt has " << prompt.frames.cols << " bands, prompt encoder wants "
                                      << model.prompt_encoder->in_dim());

  CodecFrameSequence capped = prompt;
  if (capped.frames.rows > model.prompt_max_frames)
    capped.frames = crop_rows(capped.frames, 0, model.prompt_max_frames);
  SpeakerPrompt p = model.prompt_encoder->encode(capped);

  GeneratorOutput out;
  Mat emb = model.adaptor->embed_tokens(tokens);
  if (options.forced_durations != nullptr) {
    DSR_REQUIRE(options.forced_durations->size() == tokens.size(),
                "generate: " << options.forced_durations->size() << " forced durations for "
                             << tokens.size() << " tokens");
    out.durations.frames = *options.forced_durations;
    out.durations.log_frames.resize(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i)
      out.durations.log_frames[i] = std::log(std::max(1, out.durations.frames[i]));
  } else {
    out.durations = model.adaptor->predict_duration(emb, p.frames);
  }

  Mat expanded = length_regulate(emb, out.durations.frames);
  DSR_REQUIRE(expanded.rows >= 1, "generate: all durations are zero");
  out.pitch = model.adaptor->predict_pitch(expanded, p.frames);
  FrameCondition cond = model.adaptor->build_condition(expanded, out.pitch);

  Mat zw = reverse_sample(*model.backbone, cond.frames, p.frames, model.schedule,
                          options.steps, rng, options.temperature, model.t_min);
  out.latents.frames = unwhiten_latents(model, zw);
  out.latents.time = 0.0;
  return out;
}

std::unique_ptr<GeneratorModel> train_generator(const Manifest& manifest,
                                                const CodecModel& codec,
                                                const SvEmbedder& embedder,
                                                const NormalCodecSet& normal_set,
                                                const Config& config,
                                                GeneratorTrainReport* report) {
  DSR_REQUIRE(normal_set.codec_id == codec.codec_id,
              "train_generator: normal set was built for codec '"
                  << normal_set.codec_id << "', got '" << codec.codec_id << "'");
  DSR_REQUIRE(normal_set.embedder_id == embedder.id(),
              "train_generator: normal set was built with embedder '"
                  << normal_set.embedder_id << "', got '" << embedder.id() << "'");

  Manifest normal = manifest.filter_severity(0.0);
  DSR_REQUIRE(!normal.rows.empty(), "train_generator: no severity-0 rows in manifest");

  const PhonemeInventory& inv = default_inventory();
  const std::string enhancer = config.get_string("speaker.enhancer");
  const uint64_t seed = config.get_u64("seed");

  auto model = make_generator(config, inv.size(), codec.latent_dim(), codec.codec_id,
                              derive_seed(seed, "generator"));
  model->latent_mean = codec.latent_mean;
  model->latent_std = codec.latent_std;
  for (auto& s : model->latent_std) s = std::max(s, kStdFloor);

  // Preprocess every row once: codec latents (whitened), ground-truth
  // alignment, and the normalized prompt substrate.
  std::vector<TrainItem> items;
  std::map<std::string, std::vector<int>> by_speaker;
  items.reserve(normal.rows.size());
  for (const ManifestRow& row : normal.rows) {
    int sr = 0;
    Waveform x = read_wav(manifest.audio_file(row), &sr);
    CodecEncoding enc = codec_encode(x, codec);
    AlignInfo align = read_alignment(alignment_path(manifest.dir, row.id));

    TrainItem it;
    it.tokens = inv.encode(row.phonemes);
    DSR_REQUIRE(it.tokens.size() == align.durations.size(),
                "train_generator: " << row.id << " has " << it.tokens.size()
                                    << " phonemes but " << align.durations.size()
                                    << " aligned durations");
    int f_dur = 0;
    for (int d : align.durations) f_dur += d;
    const int frames = std::min(f_dur, enc.continuous.rows);
    DSR_REQUIRE(frames >= 1, "train_generator: " << row.id << " has no frames");
    int cum = 0;
    for (size_t i = 0; i < align.durations.size() && cum < frames; ++i) {
      const int d = std::min(align.durations[i], frames - cum);
      if (d > 0) {
        it.durations.push_back(d);
        cum += d;
      } else {
        it.tokens.erase(it.tokens.begin() + static_cast<long>(it.durations.size()));
      }
    }
    it.tokens.resize(it.durations.size());
    it.pitch.hz.assign(align.pitch_hz.begin(), align.pitch_hz.begin() + frames);
    it.pitch.voiced.assign(align.voiced.begin(), align.voiced.begin() + frames);
    it.z0 = whiten_latents(*model, crop_rows(enc.continuous, 0, frames));

    Waveform enhanced = enhance(x, enhancer);
    CodecEncoding prompt_enc = codec_encode(enhanced, codec);
    it.prompt_frames =
        normalize_codec(prompt_enc.quantized, normal_set, embedder).frames;
    it.speaker = row.speaker_id;
    by_speaker[it.speaker].push_back(static_cast<int>(items.size()));
    items.push_back(std::move(it));
  }
  for (const auto& [spk, idx] : by_speaker)
    DSR_REQUIRE(idx.size() >= 2, "train_generator: speaker '"
                                     << spk << "' has only " << idx.size()
                                     << " severity-0 utterance(s); prompts need 2");

  const int steps = config.get_int("generator.steps");
  const int batch = config.get_int("generator.batch");
  const int crop = config.get_int("generator.crop_frames");
  const double lr0 = config.get_double("generator.lr");
  const double w_dur = config.get_double("generator.dur_loss_weight");
  const double w_pitch = config.get_double("generator.pitch_loss_weight");
  const double w_voice = config.get_double("generator.voice_loss_weight");
  DSR_REQUIRE(steps >= 1 && batch >= 1 && crop >= 1, "train_generator: bad schedule");

  Adam opt(&model->params, lr0);
  Rng rng(derive_seed(seed, "generator_train"));
  const int n = static_cast<int>(items.size());
  const int hidden = model->dims.hidden;

  for (int step = 0; step < steps; ++step) {
    model->params.zero_grads();
    std::vector<StepItem> sitems(batch);
    std::vector<DiffusionTrainItem> ditems(batch);
    for (int b = 0; b < batch; ++b) {
      StepItem& si = sitems[b];
      const int pick = rng.uniform_int(0, n - 1);
      crop_item(items[pick], crop, &rng, &si);

      const auto& pool = by_speaker.at(items[pick].speaker);
      int other = pick;
      while (other == pick)
        other = pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)];
      si.prompt_in = crop_prompt(items[other].prompt_frames, model->prompt_max_frames, &rng);

      si.prompt_enc = model->prompt_encoder->forward(si.prompt_in, &si.prompt_cache);
      si.emb = model->adaptor->embed_tokens(si.tokens);
      si.dur_pred = model->adaptor->duration_predictor().forward(si.emb, si.prompt_enc,
                                                                 &si.dur_cache);
      si.expanded = length_regulate(si.emb, si.durations);
      si.pitch_pred = model->adaptor->pitch_predictor().forward(si.expanded, si.prompt_enc,
                                                                &si.pitch_cache);
      si.cond = model->adaptor->build_condition_train(si.expanded, si.pitch, &si.cond_cache);
      si.dcond = Mat(si.cond.rows, hidden);
      si.dprompt = Mat(si.prompt_enc.rows, hidden);
      ditems[b] = {&si.z0, &si.cond, &si.prompt_enc, &si.dcond, &si.dprompt};
    }

    GeneratorStepLoss sl;
    sl.diffusion = diffusion_loss(*model->backbone, model->schedule, ditems, &rng,
                                  model->t_min);
    for (int b = 0; b < batch; ++b) {
      StepItem& si = sitems[b];
      Mat ddur(si.dur_pred.rows, 1);
      sl.duration += duration_log_mse(si.dur_pred, si.durations, &ddur) / batch;
      for (auto& v : ddur.data) v *= w_dur / batch;

      Mat dpitch(si.pitch_pred.rows, 2);
      double mse = 0.0, bce = 0.0;
      pitch_target_loss(si.pitch_pred, si.pitch, w_pitch, w_voice, &dpitch, &mse, &bce);
      sl.pitch += mse / batch;
      sl.voice += bce / batch;
      for (auto& v : dpitch.data) v /= batch;

      Mat dexpanded(si.expanded.rows, hidden);
      model->adaptor->build_condition_backward(si.cond_cache, si.dcond, &dexpanded);
      model->adaptor->pitch_predictor().backward(si.pitch_cache, dpitch, &dexpanded,
                                                 &si.dprompt);
      Mat demb(si.emb.rows, hidden);
      length_regulate_backward(dexpanded, si.durations, &demb);
      model->adaptor->duration_predictor().backward(si.dur_cache, ddur, &demb, &si.dprompt);
      model->adaptor->token_embedding().backward(si.tokens, demb);
      Mat dpin(si.prompt_in.rows, si.prompt_in.cols);
      model->prompt_encoder->backward(si.prompt_cache, si.dprompt, &dpin);
    }
    sl.total = sl.diffusion + w_dur * sl.duration + w_pitch * sl.pitch + w_voice * sl.voice;
    DSR_REQUIRE(std::isfinite(sl.total),
                "train_generator: non-finite loss at step " << step);

    model->params.clip_grad_norm(10.0);
    opt.set_lr(cosine_lr(lr0, step, steps));
    opt.step();
    if (report != nullptr) report->curve.push_back(sl);
  }
  return model;
}

void save_generator(const GeneratorModel& model, const std::string& dir) {
  std::filesystem::create_directories(dir);
  BinaryWriter w(dir + "/generator.bin", kGeneratorMagic, 1);
  const GeneratorDims& d = model.dims;
  for (int v : {d.vocab, d.latent, d.hidden, d.prompt_blocks, d.prompt_heads,
                d.variance_kernel, d.variance_heads, d.pitch_bins, d.diffusion_blocks,
                d.diffusion_cycle, d.diffusion_heads, model.prompt_max_frames})
    w.put_i32(v);
  w.put_f64(model.schedule.beta_min);
  w.put_f64(model.schedule.beta_max);
  w.put_f64(model.t_min);
  w.put_string(model.codec_id);
  w.put_u64(model.config_hash);
  w.put_vector(model.latent_mean);
  w.put_vector(model.latent_std);
  model.params.save(&w);
  w.close();

  std::map<std::string, std::string> kv;
  kv["beta_min"] = std::to_string(model.schedule.beta_min);
  kv["beta_max"] = std::to_string(model.schedule.beta_max);
  kv["t_min"] = std::to_string(model.t_min);
  kv["vocab"] = std::to_string(d.vocab);
  kv["latent_dim"] = std::to_string(d.latent);
  kv["hidden"] = std::to_string(d.hidden);
  kv["prompt_blocks"] = std::to_string(d.prompt_blocks);
  kv["prompt_heads"] = std::to_string(d.prompt_heads);
  kv["variance_kernel"] = std::to_string(d.variance_kernel);
  kv["variance_heads"] = std::to_string(d.variance_heads);
  kv["pitch_bins"] = std::to_string(d.pitch_bins);
  kv["diffusion_blocks"] = std::to_string(d.diffusion_blocks);
  kv["diffusion_cycle"] = std::to_string(d.diffusion_cycle);
  kv["diffusion_heads"] = std::to_string(d.diffusion_heads);
  kv["prompt_max_frames"] = std::to_string(model.prompt_max_frames);
  kv["codec_id"] = model.codec_id;
  kv["config_hash"] = hex64(model.config_hash);
  kv["num_params"] = std::to_string(model.params.num_scalars());
  write_kv_file(dir + "/generator_meta.kv", kv);
}

std::unique_ptr<GeneratorModel> load_generator(const std::string& dir) {
  BinaryReader r(dir + "/generator.bin", kGeneratorMagic, 1);
  auto m = std::make_unique<GeneratorModel>();
  GeneratorDims& d = m->dims;
  for (int* v : {&d.vocab, &d.latent, &d.hidden, &d.prompt_blocks, &d.prompt_heads,
                 &d.variance_kernel, &d.variance_heads, &d.pitch_bins, &d.diffusion_blocks,
                 &d.diffusion_cycle, &d.diffusion_heads, &m->prompt_max_frames})
    *v = r.get_i32();
  m->schedule.beta_min = r.get_f64();
  m->schedule.beta_max = r.get_f64();
  m->t_min = r.get_f64();
  m->codec_id = r.get_string();
  m->config_hash = r.get_u64();
  m->latent_mean = r.get_vector();
  m->latent_std = r.get_vector();
  DSR_REQUIRE(static_cast<int>(m->latent_mean.size()) == d.latent &&
                  static_cast<int>(m->latent_std.size()) == d.latent,
              "load_generator: whitening stats do not match latent dim");
  build_modules(m.get(), 0);
  m->params.load(&r);
  return m;
}

}  // namespace dsr
