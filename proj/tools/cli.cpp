#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "tstereo/config.hpp"
#include "tstereo/error.hpp"
#include "tstereo/evaluation.hpp"
#include "tstereo/io.hpp"
#include "tstereo/parallel.hpp"
#include "tstereo/pipeline.hpp"
#include "tstereo/reports.hpp"
#include "tstereo/selftest.hpp"
#include "tstereo/sequence.hpp"
#include "tstereo/synthetic.hpp"

namespace tstereo {

namespace {

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::string mode;
  int iters = -1;
  long long seed = -1;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_file, "key = value configuration file");
  cmd->add_option("--set", o.sets, "override one key (key=value); repeatable")->allow_extra_args(false);
  cmd->add_option("--mode", o.mode, "temporal or single_frame");
  cmd->add_option("--iters", o.iters, "refinement iterations N");
  cmd->add_option("--seed", o.seed, "seed of the default gate weights");
  cmd->add_option("--threads", o.threads, "worker threads (0 = OpenMP default)");
}

// Precedence: defaults < config file < --set < direct flags.
RunConfig resolve_config(const CommonOptions& o) {
  RunConfig cfg;
  if (!o.config_file.empty()) load_config_file(cfg, o.config_file);
  for (const std::string& s : o.sets) apply_assignment(cfg, s);
  if (!o.mode.empty()) apply_setting(cfg, "mode", o.mode);
  if (o.iters >= 0) apply_setting(cfg, "iters", std::to_string(o.iters));
  if (o.iters < -1) throw ConfigError("--iters must be >= 0");
  if (o.seed >= 0) apply_setting(cfg, "seed", std::to_string(o.seed));
  if (o.seed < -1) throw ConfigError("--seed must be >= 0");
  if (o.threads >= 0) apply_setting(cfg, "threads", std::to_string(o.threads));
  if (o.threads < -1) throw ConfigError("--threads must be >= 0");
  cfg.validate();
  return cfg;
}

StereoPipeline make_pipeline(const RunConfig& cfg) {
  const int f = cfg.pipeline.completion.state_channels;
  FusionWeights fusion = cfg.fusion_weights.empty() ? FusionWeights::random(f, cfg.pipeline.seed)
                                                    : read_fusion_weights(cfg.fusion_weights);
  FusionWeights update = cfg.update_weights.empty() ? FusionWeights::random(f, cfg.pipeline.seed + 1)
                                                    : read_fusion_weights(cfg.update_weights);
  return StereoPipeline(cfg.pipeline, std::move(fusion), std::move(update));
}

// Per-iteration disparity and |step| maps for step-size plots.
class IterationDumpSink : public FrameSink {
 public:
  explicit IterationDumpSink(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
  void consume(const Frame& frame, const FrameResult& result) override {
    for (std::size_t i = 0; i < result.iterations.size(); ++i) {
      const IterationRecord& it = result.iterations[i];
      const std::string stem = frame_stem(frame.index) + "_i" + std::to_string(i + 1);
      write_pfm(dir_ / (stem + "_d.pfm"), it.d_gdp);
      Image<double> abs_step = it.step;
      for (double& x : abs_step.pixels()) x = std::abs(x);
      write_pfm(dir_ / (stem + "_step.pfm"), abs_step);
    }
  }

 private:
  fs::path dir_;
};

int cmd_run(const CommonOptions& common, const std::string& input, const std::string& output, bool png,
            bool dump_iterations, bool print_config, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve_config(common);
  if (!input.empty()) cfg.input = input;
  if (!output.empty()) cfg.output = output;
  if (png) cfg.write_png = true;
  if (print_config) {
    out << to_config_text(cfg);
    return kExitOk;
  }
  if (cfg.input.empty()) throw ConfigError("run: no input sequence given");
  if (cfg.output.empty()) throw ConfigError("run: no output directory given (--output)");
  if (cfg.threads > 0) set_thread_count(cfg.threads);

  SequenceReader reader(cfg.input);
  StereoPipeline pipeline = make_pipeline(cfg);
  pipeline.set_logger([&err](const std::string& msg) { err << "warning: " << msg << "\n"; });
  pipeline.set_keep_intermediates(dump_iterations);

  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) throw IoError("cannot create " + cfg.output.string());
  const OutputLayout layout{cfg.output};

  DisparityWriterSink disp_sink(cfg.output, cfg.write_png);
  std::vector<FrameSink*> sinks{&disp_sink};
  std::optional<IterationDumpSink> dump_sink;
  if (dump_iterations) {
    dump_sink.emplace(cfg.output / "iter");
    sinks.push_back(&*dump_sink);
  }
  std::optional<MetricsJsonlWriter> writer;
  MetricsAggregator aggregator;
  std::optional<EvaluationSink> eval_sink;
  if (reader.has_ground_truth()) {
    writer.emplace(layout.metrics(), reader.name());
    eval_sink.emplace(reader, cfg.flow_sampling);
    eval_sink->set_float32_predictions(true);
    eval_sink->set_writer(&*writer);
    eval_sink->set_aggregator(&aggregator);
    sinks.push_back(&*eval_sink);
  }

  const RunSummary summary = run_sequence(reader, pipeline, sinks);
  if (writer) {
    writer->close();
    write_metrics_summary_csv(layout.summary(), reader.name(), aggregator.rows());
  }
  write_file_atomic(cfg.output / "run_config.txt", to_config_text(cfg));
  out << "processed " << summary.frames << " frame(s), " << summary.fallbacks << " fallback(s) -> "
      << cfg.output.string() << "\n";
  return kExitOk;
}

DisparityMap load_prediction(const fs::path& dir, int index) {
  const fs::path pfm = dir / (frame_stem(index) + ".pfm");
  if (fs::exists(pfm)) return read_pfm(pfm);
  const fs::path png = dir / (frame_stem(index) + ".png");
  if (fs::exists(png)) return read_disp_png16(png).values;
  throw IoError("no disparity for frame " + frame_stem(index) + " in " + dir.string());
}

int cmd_eval(const CommonOptions& common, std::string disp_dir, const std::string& gt_dir, const std::string& output,
             std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  if (cfg.threads > 0) set_thread_count(cfg.threads);
  fs::path disp = disp_dir;
  if (fs::is_directory(disp / "disp")) disp /= "disp";
  SequenceReader reader(gt_dir);
  if (!reader.has_ground_truth()) throw IoError("no ground truth in " + gt_dir);
  const fs::path out_dir = output.empty() ? fs::path(disp_dir) : fs::path(output);
  fs::create_directories(out_dir);
  const OutputLayout layout{out_dir};

  MetricsJsonlWriter writer(layout.metrics(), reader.name());
  MetricsAggregator aggregator;
  SequenceEvaluator evaluator(cfg.flow_sampling);
  const auto emit = [&](const std::optional<FrameMetrics>& m) {
    if (!m) return;
    writer.write(*m);
    aggregator.add(*m);
  };
  for (int i = 0; i < reader.frame_count(); ++i) {
    EvalFrame f{i, reader.poses()[i].pose, reader.camera(), load_prediction(disp, i), reader.ground_truth(i)};
    if (!f.disparity.same_shape(f.gt.disparity))
      throw ConfigError("frame " + frame_stem(i) + ": prediction size differs from ground truth");
    emit(evaluator.push(std::move(f)));
  }
  emit(evaluator.finish());
  writer.close();
  const auto rows = aggregator.rows();
  write_metrics_summary_csv(layout.summary(), reader.name(), rows);
  for (const SummaryRow& r : rows) {
    out << to_string(r.region) << ": frames=" << r.frames;
    if (r.epe) out << " epe=" << *r.epe << " bad3=" << *r.bad3;
    if (r.abs_dd) out << " abs_dd=" << *r.abs_dd << " relu_de=" << *r.relu_de;
    out << "\n";
  }
  return kExitOk;
}

int cmd_synth(const std::string& scene_file, const std::string& preset, int frames, long long seed, double noise,
              const std::string& output, std::ostream& out) {
  if (output.empty()) throw ConfigError("synth: --output is required");
  SceneSpec spec;
  if (!scene_file.empty()) {
    if (!preset.empty()) throw ConfigError("synth: give either a scene file or --preset, not both");
    spec = read_scene_file(scene_file);
  } else {
    StandardSceneOptions opts;
    if (preset == "standard" || preset.empty()) {
      opts.single_plane = false;
    } else if (preset == "single_plane") {
      opts.single_plane = true;
    } else {
      throw ConfigError("synth: unknown preset '" + preset + "' (expected standard or single_plane)");
    }
    if (frames >= 0) {
      if (frames < 1) throw ConfigError("synth: --frames must be >= 1");
      opts.frames = frames;
    }
    if (seed >= 0) opts.seed = static_cast<std::uint64_t>(seed);
    if (noise >= 0.0) opts.noise_sigma = noise;
    spec = standard_scene(opts);
  }
  write_synthetic_sequence(output, spec);
  write_scene_file(fs::path(output) / "scene.json", spec);
  out << "wrote " << spec.frame_count() << " frame(s) to " << output << "\n";
  return kExitOk;
}

std::string read_text(const fs::path& p) {
  try {
    return read_file(p);
  } catch (const IoError&) {
    return {};
  }
}

std::size_t count_lines(const fs::path& p) {
  const std::string text = read_text(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

// Command-level examples; each invokes the tool recursively.
void cli_checks(CheckRecorder& rec, const fs::path& scratch) {
  std::ostringstream sink_out, sink_err;
  const auto run = [&](std::vector<std::string> args) {
    sink_err.str("");
    return cli_main(args, sink_out, sink_err);
  };
  const fs::path seq = scratch / "standard";
  const fs::path out_t = scratch / "out_temporal";
  const fs::path out_s = scratch / "out_single";
  const fs::path eval_dir = scratch / "eval";
  const int frames = 8;

  const int synth = run({"synth", "--preset", "standard", "--output", seq.string()});
  rec.run("cli: synth, run and eval give one metrics line per frame and region", [&] {
    if (synth != 0) return false;
    if (run({"run", seq.string(), "--output", out_t.string(), "--mode", "temporal"}) != 0) return false;
    if (run({"eval", "--disp", out_t.string(), "--gt", seq.string(), "--output", eval_dir.string()}) != 0)
      return false;
    return count_lines(eval_dir / "metrics.jsonl") == 2 * frames &&
           count_lines(out_t / "metrics.jsonl") == 2 * frames &&
           read_text(eval_dir / "metrics.jsonl") == read_text(out_t / "metrics.jsonl");
  });
  rec.run("cli: frame 0 is identical in temporal and single-frame mode", [&] {
    if (run({"run", seq.string(), "--output", out_s.string(), "--mode", "single_frame"}) != 0) return false;
    const std::string a = read_text(out_t / "disp" / "000000.pfm");
    return !a.empty() && a == read_text(out_s / "disp" / "000000.pfm");
  });
  rec.run("cli: theta=1.5 is accepted with census descriptors", [&] {
    return run({"run", seq.string(), "--output", out_s.string(), "--set", "descriptor=census", "--set", "theta=1.5",
                "--print-config"}) == kExitOk;
  });
  rec.run("cli: theta=-1 is a validation error", [&] {
    return run({"run", seq.string(), "--output", out_s.string(), "--set", "theta=-1", "--print-config"}) ==
           kExitValidation;
  });
  rec.run("cli: corrupt pose line aborts with its line number", [&] {
    const fs::path bad = scratch / "corrupt";
    fs::create_directories(bad);
    fs::copy(seq, bad, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    std::string poses = read_text(bad / "poses.txt");
    const auto second = poses.find('\n', poses.find('\n') + 1);  // after the header and first pose
    poses.insert(second + 1, "not a pose\n");
    write_file_atomic(bad / "poses.txt", poses);
    const int code = run({"run", bad.string(), "--output", (scratch / "out_bad").string()});
    return code != 0 && sink_err.str().find("line 3") != std::string::npos;
  });
}

int cmd_selftest(const std::string& scratch_arg, bool verbose, bool library_only, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  fs::path scratch = scratch_arg;
  const bool temporary = scratch.empty();
  if (temporary) {
    std::random_device rd;
    scratch = fs::temp_directory_path() / ("tstereo-selftest-" + std::to_string(rd()));
  }
  fs::create_directories(scratch);
  CheckRecorder rec;
  run_library_selftest(rec, scratch);
  if (!library_only) cli_checks(rec, scratch);
  if (temporary) {
    std::error_code ec;
    fs::remove_all(scratch, ec);
  }
  for (const SelftestCheck& c : rec.checks())
    if (verbose || !c.passed)
      out << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << rec.checks().size() - rec.failures() << "/" << rec.checks().size() << " checks passed in " << seconds
      << " s\n";
  return rec.failures() == 0 ? kExitOk : kExitValidation;
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stereo disparity for rectified video with temporal state"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tstereo 0.1.0");

  CommonOptions run_opts;
  std::string run_input, run_output;
  bool run_png = false, run_dump = false, run_print = false;
  CLI::App* run = app.add_subcommand("run", "process a sequence directory");
  run->add_option("input", run_input, "sequence directory (camera.txt, poses.txt, left/, right/)");
  run->add_option("-o,--output", run_output, "output directory");
  run->add_flag("--png", run_png, "also write 16-bit KITTI disparity PNGs");
  run->add_flag("--dump-iterations", run_dump, "write per-iteration disparity and |step| maps");
  run->add_flag("--print-config", run_print, "validate and print the resolved configuration, then exit");
  add_common(run, run_opts);

  CommonOptions eval_opts;
  std::string eval_disp, eval_gt, eval_output;
  CLI::App* eval = app.add_subcommand("eval", "score disparity maps against ground truth");
  eval->add_option("--disp", eval_disp, "directory of NNNNNN.pfm / .png predictions (or a run output)")->required();
  eval->add_option("--gt", eval_gt, "sequence directory with ground truth")->required();
  eval->add_option("-o,--output", eval_output, "report directory (defaults to --disp)");
  add_common(eval, eval_opts);

  std::string synth_scene, synth_preset, synth_output;
  int synth_frames = -1;
  long long synth_seed = -1;
  double synth_noise = -1.0;
  CLI::App* synth = app.add_subcommand("synth", "render a synthetic sequence with ground truth");
  synth->add_option("scene", synth_scene, "JSON scene description");
  synth->add_option("--preset", synth_preset, "standard or single_plane");
  synth->add_option("--frames", synth_frames, "frame count of the preset");
  synth->add_option("--seed", synth_seed, "texture seed of the preset");
  synth->add_option("--noise", synth_noise, "additive Gaussian intensity noise of the preset");
  synth->add_option("-o,--output", synth_output, "sequence directory to create");

  std::string selftest_scratch;
  bool selftest_verbose = false, selftest_library = false;
  CLI::App* selftest = app.add_subcommand("selftest", "run the exact-value example suite");
  selftest->add_option("--scratch", selftest_scratch, "working directory (default: a temp directory)");
  selftest->add_flag("-v,--verbose", selftest_verbose, "print every check");
  selftest->add_flag("--library-only", selftest_library, "skip the command-level checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (run->parsed())
      return cmd_run(run_opts, run_input, run_output, run_png, run_dump, run_print, out, err);
    if (eval->parsed()) return cmd_eval(eval_opts, eval_disp, eval_gt, eval_output, out);
    if (synth->parsed())
      return cmd_synth(synth_scene, synth_preset, synth_frames, synth_seed, synth_noise, synth_output, out);
    if (selftest->parsed()) return cmd_selftest(selftest_scratch, selftest_verbose, selftest_library, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> storage{"tstereo"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : storage) argv.push_back(s.data());
  return cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace tstereo
