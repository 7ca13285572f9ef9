#include "ainx/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "ainx/augment.hpp"
#include "ainx/binary_io.hpp"
#include "ainx/checkpoint.hpp"
#include "ainx/config.hpp"
#include "ainx/manifest.hpp"
#include "ainx/profiler.hpp"
#include "ainx/spec_file.hpp"
#include "ainx/wav.hpp"

namespace ainx::cli {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;  // raw key=value overrides
};

/// Base values, then the config file, then command-line flags.
io::RunConfig resolve(io::RunConfig base, const Globals& g, const std::vector<std::pair<std::string, std::string>>& flags) {
  if (!g.config_path.empty()) io::apply_config_file(base, g.config_path);
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    base.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [k, v] : flags) base.set(k, v);
  if (g.seed) base.seed = *g.seed;
  if (!g.out.empty()) base.out = g.out;
  return base;
}

std::string require_out(const io::RunConfig& c, const char* what) {
  if (c.out.empty()) throw std::invalid_argument(std::string(what) + " needs --out");
  return c.out;
}

dsp::SpectrogramConfig preset(const std::string& name) {
  return train::parse_phase(name) == train::Phase::pretrain ? dsp::SpectrogramConfig::pretrain()
                                                             : dsp::SpectrogramConfig::finetune();
}

std::vector<std::pair<std::string, std::string>> checkpoint_metadata(const io::RunConfig& c, std::size_t epochs_done) {
  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("format", "ainx-checkpoint");
  meta.emplace_back("epoch", std::to_string(epochs_done));
  for (const auto& [k, v] : c.to_pairs()) {
    if (!k.starts_with("paths.")) meta.emplace_back("config." + k, v);
  }
  return meta;
}

io::RunConfig config_from_checkpoint(const io::Checkpoint& ckpt) {
  io::RunConfig c;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.starts_with("config.")) c.set(k.substr(7), v);
  }
  return c;
}

std::string spectrogram_diff(const dsp::SpectrogramConfig& a, const dsp::SpectrogramConfig& b) {
  io::RunConfig ca, cb;
  ca.spectrogram = a;
  cb.spectrogram = b;
  std::string diff;
  for (const auto& key : io::RunConfig::keys()) {
    if (!key.starts_with("spectrogram.")) continue;
    if (ca.get(key) != cb.get(key)) diff += "\n  " + key + ": checkpoint " + ca.get(key) + ", requested " + cb.get(key);
  }
  return diff;
}

std::uint64_t prefix_params(const model::Model& m, const std::string& prefix) {
  std::uint64_t n = 0;
  for (const auto& nt : m.named_parameters()) {
    if (nt.name.starts_with(prefix)) n += nt.tensor.numel();
  }
  return n;
}

void print_summary(const model::Model& m, std::size_t frames, std::size_t bins, std::ostream& out) {
  const auto& c = m.config();
  const auto ext = model::stage_extents(c, frames, bins);
  out << "input: 1 x " << frames << " x " << bins << " (channels x time x frequency)\n";
  out << "stem: conv " << c.stem_kernel_h << "x" << c.stem_kernel_w << " stride " << c.stem_stride << " -> "
      << c.resolved_stem_out() << " channels, BN, ReLU, max-pool 3x3 stride 2 -> " << ext[0][0] << " x " << ext[0][1]
      << ", params " << prefix_params(m, "stem.") << "\n";
  std::string kernels;
  for (auto k : c.branch_kernels) kernels += (kernels.empty() ? "" : ",") + std::to_string(k);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name = "stage" + std::to_string(i + 1);
    out << name << ": channels " << c.stage_channels[i] << ", depth " << c.stage_depths[i] << ", expansion "
        << c.expansion << ", kernels " << kernels << ", out " << ext[i + 1][0] << " x " << ext[i + 1][1]
        << ", params " << prefix_params(m, name + ".") << "\n";
  }
  out << "head: global average pool, linear " << c.stage_channels[3] << " -> " << c.num_classes << ", params "
      << prefix_params(m, "head.") << "\n";
  out << "total params: " << profiler::count_params(m) << "\n";
}

model::Model build_initialized(const io::RunConfig& c) {
  auto m = model::build_model<float>(c.model);
  std::mt19937_64 rng(train::sample_seed(c.seed, 0xC0FFEE, 0));
  m.init_parameters(rng, c.init);
  return m;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    io::write_text_atomic(path, text);
  }
}

// ---- subcommands -----------------------------------------------------------

struct SpectrogramArgs {
  std::string input;
  std::string preset = "finetune";
  bool fit = false;
};

int run_spectrogram(const Globals& g, const SpectrogramArgs& a, std::ostream& out) {
  io::RunConfig base;
  base.spectrogram = preset(a.preset);
  const auto c = resolve(base, g, {});
  c.spectrogram.validate();
  const auto clip = io::read_wav(a.input);
  auto samples = clip.sample_rate == c.spectrogram.sample_rate
                     ? clip.samples
                     : dsp::resample_linear(clip.samples, clip.sample_rate, c.spectrogram.sample_rate);
  auto spec = dsp::log_mel(samples, c.spectrogram);
  if (a.fit) {
    std::mt19937_64 unused(0);
    spec = dsp::fit_to_frames(spec, c.spectrogram.target_frames(), dsp::CropMode::center, unused);
  }
  const auto path = require_out(c, "spectrogram");
  dsp::write_spec(path, spec.values);
  out << "wrote " << spec.frames() << " x " << spec.bins() << " spectrogram to " << path << "\n";
  return 0;
}

struct AugmentArgs {
  std::string input;
  bool center = true;
};

int run_augment(const Globals& g, const AugmentArgs& a, std::ostream& out) {
  dsp::Spectrogram spec;
  spec.values = dsp::read_spec(a.input);
  io::RunConfig base;
  base.augment = augment::AugmentPolicy::defaults_for(spec.frames(), spec.bins());
  const auto c = resolve(base, g, {});
  c.augment.validate(spec.frames(), spec.bins());
  if (a.center) dsp::center_in_place(spec);
  std::mt19937_64 rng(c.seed);
  augment::AugmentStats stats;
  const auto result = augment::augment(spec, c.augment, rng, &stats);
  const auto path = require_out(c, "augment");
  dsp::write_spec(path, result.values);
  out << "wrote " << result.frames() << " x " << result.bins() << " augmented spectrogram to " << path
      << " (seed " << c.seed << ", warps skipped " << stats.warps_skipped << ")\n";
  return 0;
}

int run_summary(const Globals& g, std::ostream& out) {
  const auto c = resolve(io::RunConfig{}, g, {});
  c.model.validate();
  const auto m = model::build_model<float>(c.model);
  print_summary(m, c.spectrogram.target_frames(), c.spectrogram.n_mels, out);
  return 0;
}

struct ProfileArgs {
  std::string format = "text";
  bool count_bn = false;
  bool flops = false;
};

int run_profile(const Globals& g, const ProfileArgs& a, std::ostream& out) {
  const auto c = resolve(io::RunConfig{}, g, {});
  c.model.validate();
  c.spectrogram.validate();
  const auto m = model::build_model<float>(c.model);
  profiler::Conventions conv;
  conv.count_bn = a.count_bn;
  conv.macs_as_flops = !a.flops;
  const auto report =
      profiler::profile(m, {1, c.model.in_channels, c.spectrogram.target_frames(), c.spectrogram.n_mels}, conv);
  std::ostringstream text;
  profiler::emit_table(report, a.format == "csv" ? profiler::TableFormat::csv : profiler::TableFormat::text, text);
  write_text(c.out, text.str(), out);
  return 0;
}

struct TrainArgs {
  std::string phase = "finetune";
  bool synthetic = false;
  std::size_t classes = 4;
  std::size_t samples_per_class = 8;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::string manifest;
  std::string eval_manifest;
  std::string init_from;
  bool reset_head = false;
  std::string log;
  std::string report;
  std::optional<double> stop_at_top1;
};

train::Dataset load_data(const io::RunConfig& c, bool synthetic, std::size_t classes, std::size_t per_class,
                         std::uint64_t seed, const std::string& manifest) {
  if (synthetic) {
    train::SyntheticOptions o;
    o.sample_rate = c.spectrogram.sample_rate;
    o.seconds = c.spectrogram.clip_seconds;
    o.max_hz = std::min(o.max_hz, 0.45 * c.spectrogram.sample_rate);
    return train::make_synthetic_dataset(classes, per_class, seed, o);
  }
  if (manifest.empty()) throw std::invalid_argument("need --manifest (or paths.manifest) or --synthetic");
  return io::load_dataset(io::parse_manifest(manifest));
}

int run_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
  std::vector<std::pair<std::string, std::string>> flags;
  if (a.synthetic) flags.emplace_back("model.num_classes", std::to_string(a.classes));
  if (a.epochs) flags.emplace_back("train.epochs", std::to_string(*a.epochs));
  if (a.lr) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", *a.lr);
    flags.emplace_back("train.base_lr", buf);
  }
  if (a.batch_size) flags.emplace_back("train.batch_size", std::to_string(*a.batch_size));
  if (!a.manifest.empty()) flags.emplace_back("paths.manifest", a.manifest);
  if (!a.eval_manifest.empty()) flags.emplace_back("paths.eval_manifest", a.eval_manifest);
  const auto phase_preset = io::RunConfig::for_phase(train::parse_phase(a.phase));
  auto c = resolve(phase_preset, g, flags);
  // Preset decay epochs past a shortened schedule are dropped, so that
  // changing only the epoch count stays valid. Explicit lists are kept.
  if (c.schedule.decay_epochs == phase_preset.schedule.decay_epochs) {
    std::erase_if(c.schedule.decay_epochs, [&](std::size_t d) { return d >= c.schedule.epochs; });
  }
  c.validate();
  const auto ckpt_path = require_out(c, "train");

  const auto dataset = load_data(c, a.synthetic, a.classes, a.samples_per_class, c.seed, c.manifest);
  if (dataset.num_classes() != c.model.num_classes) {
    throw std::invalid_argument("dataset has " + std::to_string(dataset.num_classes()) + " classes but model.num_classes is " +
                                std::to_string(c.model.num_classes));
  }
  auto m = build_initialized(c);
  if (!a.init_from.empty()) {
    const auto ckpt = io::read_checkpoint(a.init_from);
    io::load_into(ckpt, m, nullptr, {.reset_head = a.reset_head});
  }
  m.set_bn_policy(c.bn_policy);

  train::TrainOptions opts;
  opts.schedule = c.schedule;
  opts.spectrogram = c.spectrogram;
  opts.augment = c.augment;
  opts.seed = c.seed;
  SgdMomentum optimizer(c.schedule.momentum);

  const std::string log_path = a.log.empty() ? ckpt_path + ".log.tsv" : a.log;
  std::string log = "epoch\tlr\tloss\ttop1\n";
  io::write_text_atomic(log_path, log);
  std::size_t done = 0;
  for (std::size_t e = 0; e < c.schedule.epochs; ++e) {
    const auto stats = train::train_epoch(m, dataset, opts, optimizer, e);
    const auto line = train::format_epoch_line(stats);
    log += line;
    io::write_text_atomic(log_path, log);
    out << line << std::flush;
    done = e + 1;
    if (a.stop_at_top1 && stats.top1 >= *a.stop_at_top1) break;
  }
  io::save_checkpoint(ckpt_path, m, &optimizer, checkpoint_metadata(c, done));

  train::Dataset eval_set = dataset;
  if (!c.eval_manifest.empty()) eval_set = io::load_dataset(io::parse_manifest(c.eval_manifest));
  const auto report = train::evaluate(m, eval_set, c.spectrogram, c.schedule.batch_size);
  const std::string report_path = a.report.empty() ? ckpt_path + ".report.txt" : a.report;
  io::write_text_atomic(report_path, report.to_key_value());
  out << "epochs " << done << ", eval top1 " << report.top1 << ", checkpoint " << ckpt_path << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  bool synthetic = false;
  std::size_t samples_per_class = 8;
  bool force = false;
};

int run_eval(const Globals& g, const EvalArgs& a, std::ostream& out) {
  const auto ckpt = io::read_checkpoint(a.checkpoint);
  const auto stored = config_from_checkpoint(ckpt);
  auto c = resolve(stored, g, {});
  if (!a.manifest.empty()) c.manifest = a.manifest;
  if (c.spectrogram != stored.spectrogram) {
    const auto diff = spectrogram_diff(stored.spectrogram, c.spectrogram);
    if (!a.force) {
      throw std::invalid_argument("spectrogram settings differ from the checkpoint (use --force to override):" + diff);
    }
  }
  if (c.model != stored.model) throw std::invalid_argument("model settings cannot be changed for eval");
  auto m = model::build_model<float>(c.model);
  io::load_into(ckpt, m);
  const auto dataset = load_data(c, a.synthetic, c.model.num_classes, a.samples_per_class, c.seed, c.manifest);
  const auto report = train::evaluate(m, dataset, c.spectrogram, c.schedule.batch_size);
  write_text(c.out, report.to_key_value(), out);
  return 0;
}

int run_inspect(const std::string& path, std::ostream& out) {
  const auto ckpt = io::read_checkpoint(path);
  out << "metadata:\n";
  for (const auto& [k, v] : ckpt.metadata) out << "  " << k << "=" << v << "\n";
  out << "tensors: " << ckpt.tensors.size() << "\n";
  std::uint64_t params = 0, buffers = 0, optim = 0;
  for (const auto& t : ckpt.tensors) {
    std::string shape;
    for (auto d : t.shape) shape += (shape.empty() ? "" : "x") + std::to_string(d);
    char sum[32];
    std::snprintf(sum, sizeof sum, "%016llx", static_cast<unsigned long long>(io::checksum(t.data)));
    out << "  " << t.name << " " << (shape.empty() ? "scalar" : shape) << " " << sum << "\n";
    if (t.name.starts_with(io::kVelocityPrefix)) {
      optim += t.data.size();
    } else if (t.name.ends_with(".running_mean") || t.name.ends_with(".running_var")) {
      buffers += t.data.size();
    } else {
      params += t.data.size();
    }
  }
  out << "params: " << params << "\nbuffers: " << buffers << "\noptimizer: " << optim << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ainx: multi-scale separable-kernel audio classifier toolkit", "ainx"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "key=value config file (flags override it)")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--out", g.out, "output path");
  app.add_option("--set", g.sets, "override any config key: --set key=value (repeatable)");

  SpectrogramArgs spec_args;
  auto* spec_cmd = app.add_subcommand("spectrogram", "WAV file to an AINXSPEC log-mel matrix");
  spec_cmd->add_option("input", spec_args.input, "input WAV")->required()->check(CLI::ExistingFile);
  spec_cmd->add_option("--preset", spec_args.preset, "pretrain or finetune")
      ->check(CLI::IsMember({"pretrain", "finetune"}));
  spec_cmd->add_flag("--fit", spec_args.fit, "crop or pad to the preset frame count");

  AugmentArgs aug_args;
  auto* aug_cmd = app.add_subcommand("augment", "Seeded SpecAugment of an AINXSPEC file");
  aug_cmd->add_option("input", aug_args.input, "input AINXSPEC")->required()->check(CLI::ExistingFile);
  aug_cmd->add_flag("!--no-center", aug_args.center, "skip mean-centering before masking");

  auto* summary_cmd = app.add_subcommand("summary", "Print the architecture");

  ProfileArgs prof_args;
  auto* prof_cmd = app.add_subcommand("profile", "Per-layer parameter and MAC table");
  prof_cmd->add_option("--format", prof_args.format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
  prof_cmd->add_flag("--count-bn", prof_args.count_bn, "count BN running statistics as parameters");
  prof_cmd->add_flag("--flops", prof_args.flops, "report 2 x MACs as FLOPs");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train from a manifest or a synthetic task");
  train_cmd->add_option("--phase", train_args.phase, "pretrain or finetune")
      ->check(CLI::IsMember({"pretrain", "finetune"}));
  train_cmd->add_flag("--synthetic", train_args.synthetic, "use the synthetic sinusoid task");
  train_cmd->add_option("--classes", train_args.classes, "synthetic class count")->check(CLI::PositiveNumber);
  train_cmd->add_option("--samples-per-class", train_args.samples_per_class, "synthetic samples per class")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", train_args.epochs, "epoch count")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_args.lr, "base learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch-size", train_args.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--manifest", train_args.manifest, "training manifest CSV");
  train_cmd->add_option("--eval-manifest", train_args.eval_manifest, "held-out manifest for the final report");
  train_cmd->add_option("--init-from", train_args.init_from, "checkpoint to start from")->check(CLI::ExistingFile);
  train_cmd->add_flag("--reset-head", train_args.reset_head, "skip the checkpoint head (class count change)");
  train_cmd->add_option("--log", train_args.log, "epoch log path (default <out>.log.tsv)");
  train_cmd->add_option("--report", train_args.report, "final report path (default <out>.report.txt)");
  train_cmd->add_option("--stop-at-top1", train_args.stop_at_top1, "stop once train top-1 reaches this percentage");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("checkpoint", eval_args.checkpoint, "AINX1 checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--manifest", eval_args.manifest, "evaluation manifest CSV");
  eval_cmd->add_flag("--synthetic", eval_args.synthetic, "evaluate on the synthetic task");
  eval_cmd->add_option("--samples-per-class", eval_args.samples_per_class, "synthetic samples per class")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--force", eval_args.force, "allow spectrogram settings that differ from the checkpoint");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect-ckpt", "List checkpoint metadata and tensors");
  inspect_cmd->add_option("checkpoint", inspect_path, "AINX1 checkpoint")->required()->check(CLI::ExistingFile);

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ainx: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  if (seed_opt->count()) g.seed = seed;

  try {
    if (*spec_cmd) return run_spectrogram(g, spec_args, out);
    if (*aug_cmd) return run_augment(g, aug_args, out);
    if (*summary_cmd) return run_summary(g, out);
    if (*prof_cmd) return run_profile(g, prof_args, out);
    if (*train_cmd) return run_train(g, train_args, out);
    if (*eval_cmd) return run_eval(g, eval_args, out);
    if (*inspect_cmd) return run_inspect(inspect_path, out);
  } catch (const std::exception& e) {
    err << "ainx: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ainx::cli
