#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "config.hpp"
#include "json.hpp"
#include "lnforge/adapter.hpp"
#include "lnforge/codec.hpp"
#include "lnforge/diffusion.hpp"
#include "lnforge/digest.hpp"
#include "lnforge/error.hpp"
#include "lnforge/lnv_io.hpp"
#include "lnforge/metrics.hpp"
#include "lnforge/phantom.hpp"
#include "lnforge/sdf.hpp"
#include "lnforge/synthesis.hpp"

namespace lnforge::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Context {
  PipelineConfig cfg;
  fs::path out;
  bool verbose = false;
  std::ostream* log = nullptr;

  void note(const std::string& line) const {
    if (verbose) *log << "lnforge: " << line << "\n";
  }
};

std::vector<fs::path> list_lnv(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) fail(Errc::io, dir.string(), "not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".lnv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(Errc::too_few_samples, dir.string(), "no .lnv files found");
  return files;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Errc::io, dir.string(), ec.message());
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_loss_csv(const fs::path& path, const std::vector<double>& trace) {
  std::string out = "step,loss\n";
  for (std::size_t n = 0; n < trace.size(); ++n) out += std::to_string(n) + "," + format_g(trace[n]) + "\n";
  write_file(path, out);
}

void write_run_log(const Context& ctx, const std::string& command, const std::map<std::string, fs::path>& checkpoints,
                   const std::vector<std::string>& outputs) {
  ordered_json j;
  j["command"] = command;
  j["seed"] = ctx.cfg.seed;
  j["config_hash"] = config_hash(ctx.cfg);
  ordered_json hashes = ordered_json::object();
  for (const auto& [label, path] : checkpoints) hashes[label] = sha256_file(path);
  j["checkpoints"] = std::move(hashes);
  j["outputs"] = outputs;
  write_file(ctx.out / ("run_log_" + command + ".json"), j.dump(2) + "\n");
}

NoiseSchedule schedule_of(const PipelineConfig& c) { return make_schedule(c.schedule_steps, c.beta_start, c.beta_end); }

std::vector<std::size_t> hidden_of(const PipelineConfig& c) {
  return std::vector<std::size_t>(c.hidden.begin(), c.hidden.end());
}

double norm_scale_for(const PipelineConfig& c, const Mask& m) {
  return c.norm_scale > 0.0 ? c.norm_scale : default_norm_scale(m.dims(), m.spacing());
}

std::vector<TsdfGrid> load_tsdfs(const fs::path& dir) {
  std::vector<TsdfGrid> out;
  for (const auto& f : list_lnv(dir)) out.push_back(load_tsdf(f));
  return out;
}

std::vector<LatentCode> encode_all(const LinearCodec& codec, std::span<const TsdfGrid> grids) {
  std::vector<LatentCode> out;
  out.reserve(grids.size());
  for (const auto& g : grids) out.push_back(encode(codec, g));
  return out;
}

std::vector<double> mask_feature(const LinearCodec& codec, const Mask& m, const fs::path& source) {
  if (!(m.dims() == codec.grid_dims))
    fail(Errc::dims_mismatch, source.string(), "mask dims differ from the codec grid");
  return encode(codec, mask_to_tsdf(m, codec.clip, codec.norm_scale)).values;
}

// --- commands --------------------------------------------------------------

void cmd_phantom(const Context& ctx, const std::string& kind, int count) {
  const PipelineConfig& c = ctx.cfg;
  if (count < 0) fail(Errc::invalid_argument, "count", "must be >= 0");
  const Spacing sp{c.spacing_mm, c.spacing_mm, c.spacing_mm};
  ShapeFamily family;
  family.dims = c.shape_dims;
  family.spacing = sp;
  const auto shortest = static_cast<double>(std::min({c.shape_dims.nx, c.shape_dims.ny, c.shape_dims.nz}));
  family.max_semi_axis = 0.3 * shortest;
  family.min_semi_axis = 0.125 * shortest;
  std::vector<std::string> outputs;
  char name[64];
  if (kind == "shapes") {
    ensure_dir(ctx.out);
    const auto masks = make_toy_family(static_cast<std::size_t>(count), c.seed, family);
    for (std::size_t n = 0; n < masks.size(); ++n) {
      std::snprintf(name, sizeof name, "shape_%04zu.lnv", n);
      save_mask(masks[n], ctx.out / name);
      outputs.push_back(name);
    }
  } else if (kind == "backgrounds") {
    ensure_dir(ctx.out / "ct");
    ensure_dir(ctx.out / "regions");
    for (int n = 0; n < count; ++n) {
      Rng rng = Rng::derive(c.seed, static_cast<std::uint64_t>(n));
      const BackgroundPhantom bg = make_background(rng, c.background_dims, sp);
      std::snprintf(name, sizeof name, "bg_%03d.lnv", n);
      save_volume(bg.ct, ctx.out / "ct" / name);
      save_mask(bg.region, ctx.out / "regions" / name);
      outputs.push_back(std::string("ct/") + name);
      outputs.push_back(std::string("regions/") + name);
    }
  } else if (kind == "textures") {
    ensure_dir(ctx.out / "patches");
    ensure_dir(ctx.out / "masks");
    // lesion interior at +0.5 on the normalized intensity scale
    const float lesion_hu = c.placement.hu_lo + 0.75f * (c.placement.hu_hi - c.placement.hu_lo);
    for (int n = 0; n < count; ++n) {
      Rng rng = Rng::derive(c.seed, static_cast<std::uint64_t>(n));
      const TexturePatch p = make_texture_patch(rng, c.patch_dims, family, c.long_axis_lo, c.long_axis_hi, lesion_hu,
                                                c.placement.hu_lo, c.placement.hu_hi);
      std::snprintf(name, sizeof name, "tex_%04d.lnv", n);
      save_volume(p.texture, ctx.out / "patches" / name);
      save_mask(p.mask, ctx.out / "masks" / name);
      outputs.push_back(std::string("patches/") + name);
      outputs.push_back(std::string("masks/") + name);
    }
  } else {
    fail(Errc::invalid_argument, "kind", "expected shapes, backgrounds or textures, got '" + kind + "'");
  }
  write_run_log(ctx, "phantom", {}, outputs);
  ctx.note("wrote " + std::to_string(outputs.size()) + " phantom files to " + ctx.out.string());
}

void cmd_tsdf(const Context& ctx, const fs::path& in) {
  ensure_dir(ctx.out);
  std::vector<std::string> outputs;
  for (const auto& f : list_lnv(in)) {
    const Mask m = load_mask(f);
    save_tsdf(mask_to_tsdf(m, static_cast<float>(ctx.cfg.tau), norm_scale_for(ctx.cfg, m)), ctx.out / f.filename());
    outputs.push_back(f.filename().string());
  }
  write_run_log(ctx, "tsdf", {}, outputs);
  ctx.note("converted " + std::to_string(outputs.size()) + " masks");
}

void cmd_fit_codec(const Context& ctx, const fs::path& in, int dim, const std::string& name) {
  ensure_dir(ctx.out);
  const auto files = list_lnv(in);
  const auto d = static_cast<std::size_t>(dim > 0 ? dim : ctx.cfg.shape_latent);
  const Unit unit = read_lnv(files.front()).volume.unit();
  LinearCodec codec;
  if (unit == Unit::sdf) {
    codec = fit_codec(std::span<const TsdfGrid>(load_tsdfs(in)), d);
  } else if (unit == Unit::mask) {
    std::vector<TsdfGrid> grids;
    for (const auto& f : files) {
      const Mask m = load_mask(f);
      grids.push_back(mask_to_tsdf(m, static_cast<float>(ctx.cfg.tau), norm_scale_for(ctx.cfg, m)));
    }
    codec = fit_codec(std::span<const TsdfGrid>(grids), d);
  } else if (unit == Unit::normalized) {
    std::vector<Volume> vols;
    for (const auto& f : files) vols.push_back(load_volume(f));
    codec = fit_codec(std::span<const Volume>(vols), d, 1.0f);
  } else {
    fail(Errc::invalid_argument, in.string(), "codec inputs must be SDF, MASK or NORM volumes");
  }
  const std::string file = name + ".codec";
  save_codec(codec, ctx.out / file);
  write_run_log(ctx, "fit-codec", {}, {file});
  ctx.note("fitted rank-" + std::to_string(d) + " codec on " + std::to_string(files.size()) + " grids");
}

void cmd_train_shape(const Context& ctx, const fs::path& tsdf_dir, const fs::path& codec_path, const std::string& name) {
  ensure_dir(ctx.out);
  const PipelineConfig& c = ctx.cfg;
  const LinearCodec codec = load_codec(codec_path);
  const auto grids = load_tsdfs(tsdf_dir);
  const auto codes = encode_all(codec, grids);
  TrainConfig tc;
  tc.learning_rate = c.lr;
  tc.steps = c.steps;
  tc.batch_size = static_cast<std::size_t>(c.batch);
  tc.seed = c.seed;
  tc.lambda = c.lambda;
  const LatentTrainResult r = train_latent_model(codes, {}, hidden_of(c), schedule_of(c), tc);
  save_ddpm(r.model, ctx.out / (name + ".ddpm"));
  write_loss_csv(ctx.out / (name + "_loss.csv"), r.loss_trace);
  write_run_log(ctx, "train-shape", {{"codec", codec_path}}, {name + ".ddpm", name + "_loss.csv"});
  ctx.note("final loss " + format_g(r.loss_trace.back()));
}

void cmd_train_adapter(const Context& ctx, const fs::path& tsdf_dir, const fs::path& codec_path,
                       const std::string& ddpm_path, const std::string& name) {
  ensure_dir(ctx.out);
  const PipelineConfig& c = ctx.cfg;
  const LinearCodec codec = load_codec(codec_path);
  const auto grids = load_tsdfs(tsdf_dir);
  const auto codes = encode_all(codec, grids);
  const double sigma = latent_noise_sigma(codes, c.sigma_adapter);
  const auto pairs = make_adapter_pairs(grids, codec, sigma, mix_seed(c.seed, 0xada), c.adapter_pairs);

  std::map<std::string, fs::path> checkpoints{{"codec", codec_path}};
  double diffusion = 0.0;
  if (!ddpm_path.empty()) {
    const LatentDiffusionModel m = load_ddpm(ddpm_path);
    std::vector<DiffusionExample> data(codes.size());
    for (std::size_t n = 0; n < codes.size(); ++n) {
      data[n].z0 = codes[n].values;
      for (double& v : data[n].z0) v /= m.latent_scale;
    }
    Rng rng(mix_seed(c.seed, 0xd1ff));
    diffusion = diffusion_loss(m.net, data, m.schedule, rng).loss;
    checkpoints["shape"] = ddpm_path;
  }

  TrainConfig tc;
  tc.learning_rate = c.adapter_lr;
  tc.steps = c.adapter_steps;
  tc.batch_size = static_cast<std::size_t>(c.adapter_batch);
  tc.seed = c.seed;
  tc.lambda = c.lambda;
  Rng init = Rng::derive(c.seed, 0xada1);
  const AdapterNorm norm = c.adapter_norm == "l2" ? AdapterNorm::l2 : AdapterNorm::l1;
  const AdapterTrainResult r =
      train_adapter(make_adapter(codec.clip, init, c.adapter_channels), pairs, tc, diffusion, norm);
  save_adapter(r.net, ctx.out / (name + ".adpt"));
  write_loss_csv(ctx.out / (name + "_loss.csv"), r.loss_trace);
  ordered_json report;
  report["sigma"] = sigma;
  report["final_adapter_loss"] = r.final_adapter_loss;
  report["final_diffusion_loss"] = diffusion;
  report["lambda"] = c.lambda;
  report["total_loss"] = r.total_loss;
  write_file(ctx.out / (name + "_report.json"), report.dump(2) + "\n");
  write_run_log(ctx, "train-adapter", checkpoints, {name + ".adpt", name + "_loss.csv", name + "_report.json"});
  ctx.note("adapter loss " + format_g(r.final_adapter_loss) + ", total " + format_g(r.total_loss));
}

void cmd_train_texture(const Context& ctx, const fs::path& patch_dir, const fs::path& mask_dir,
                       const fs::path& texture_codec_path, const fs::path& cond_codec_path, const std::string& name) {
  ensure_dir(ctx.out);
  const PipelineConfig& c = ctx.cfg;
  const LinearCodec tex = load_codec(texture_codec_path);
  const LinearCodec cond = load_codec(cond_codec_path);
  TextureGenerator probe{{}, cond, tex};
  std::vector<LatentCode> codes;
  std::vector<std::vector<double>> conds;
  for (const auto& f : list_lnv(patch_dir)) {
    const fs::path mf = mask_dir / f.filename();
    if (!fs::exists(mf)) fail(Errc::io, mf.string(), "no mask for texture patch " + f.filename().string());
    codes.push_back(encode(tex, load_volume(f)));
    conds.push_back(texture_condition(probe, load_mask(mf)));
  }
  TrainConfig tc;
  tc.learning_rate = c.texture_lr;
  tc.steps = c.texture_steps;
  tc.batch_size = static_cast<std::size_t>(c.texture_batch);
  tc.seed = c.seed;
  const LatentTrainResult r = train_latent_model(codes, conds, hidden_of(c), schedule_of(c), tc);
  save_ddpm(r.model, ctx.out / (name + ".ddpm"));
  write_loss_csv(ctx.out / (name + "_loss.csv"), r.loss_trace);
  write_run_log(ctx, "train-texture", {{"texture_codec", texture_codec_path}, {"cond_codec", cond_codec_path}},
                {name + ".ddpm", name + "_loss.csv"});
  ctx.note("final loss " + format_g(r.loss_trace.back()));
}

struct SynthPaths {
  std::string backgrounds, regions, shape, codec, adapter, texture, texture_codec, cond_codec;
  int count = 0;
};

void cmd_synth(const Context& ctx, const SynthPaths& p) {
  ensure_dir(ctx.out);
  const PipelineConfig& c = ctx.cfg;
  if (p.count < 0) fail(Errc::invalid_argument, "count", "must be >= 0");

  std::map<std::string, fs::path> checkpoints{{"shape", p.shape},
                                               {"codec", p.codec},
                                               {"texture", p.texture},
                                               {"texture_codec", p.texture_codec},
                                               {"cond_codec", p.cond_codec}};
  ShapeGenerator shapes{load_ddpm(p.shape), load_codec(p.codec), std::nullopt};
  if (!p.adapter.empty()) {
    shapes.adapter = load_adapter(p.adapter);
    checkpoints["adapter"] = p.adapter;
  }
  const TextureGenerator textures{load_ddpm(p.texture), load_codec(p.cond_codec), load_codec(p.texture_codec)};
  if (!(textures.cond_codec.grid_dims == textures.texture_codec.grid_dims))
    fail(Errc::dims_mismatch, "cond_codec", "condition and texture codecs use different grids");

  std::vector<Background> backgrounds;
  for (const auto& f : list_lnv(p.backgrounds)) {
    const fs::path rf = fs::path(p.regions) / f.filename();
    if (!fs::exists(rf)) fail(Errc::io, rf.string(), "no region mask for background " + f.filename().string());
    Background b;
    b.id = f.stem().string();
    b.ct = load_volume(f);
    b.region = load_mask(rf);
    b.ct_path = fs::relative(fs::absolute(f), fs::absolute(ctx.out)).generic_string();
    b.region_path = fs::relative(fs::absolute(rf), fs::absolute(ctx.out)).generic_string();
    backgrounds.push_back(std::move(b));
  }
  std::vector<std::size_t> counts(backgrounds.size(), 0);
  for (int n = 0; n < p.count; ++n) ++counts[static_cast<std::size_t>(n) % counts.size()];

  AssemblyConfig ac;
  ac.placement = c.placement;
  ac.shape.max_tries = c.max_shape_tries;
  ac.long_axis_lo = c.long_axis_lo;
  ac.long_axis_hi = c.long_axis_hi;
  ac.seed = c.seed;
  ac.config_hash = config_hash(c);
  for (const auto& [label, path] : checkpoints) ac.checkpoint_hashes.push_back(label + "=" + sha256_file(path));

  const DatasetManifest m = assemble_dataset(backgrounds, counts, shapes, textures, ac, ctx.out);
  write_run_log(ctx, "synth", checkpoints, {"manifest.json"});
  ctx.note("placed " + std::to_string(m.entries.size()) + " lesions in " + std::to_string(backgrounds.size()) +
           " backgrounds");
}

void cmd_eval_ipr(const Context& ctx, const fs::path& real_dir, const fs::path& fake_dir, const fs::path& codec_path,
                  int k) {
  ensure_dir(ctx.out);
  const LinearCodec codec = load_codec(codec_path);
  auto features = [&](const fs::path& dir, SetLabel label) {
    FeatureSet s{codec.latent_dim(), {}, label};
    for (const auto& f : list_lnv(dir)) s.add(mask_feature(codec, load_mask(f), f));
    return s;
  };
  const FeatureSet real = features(real_dir, SetLabel::real);
  const FeatureSet fake = features(fake_dir, SetLabel::fake);
  const IprReport r = evaluate_ipr(real, fake, static_cast<std::size_t>(k > 0 ? k : ctx.cfg.k));
  write_file(ctx.out / "ipr.json", ipr_json(r));
  write_run_log(ctx, "eval-ipr", {{"codec", codec_path}}, {"ipr.json"});
  ctx.note("ip " + format_g(r.ip) + " ir " + format_g(r.ir));
}

void cmd_measure(const Context& ctx, const fs::path& in, int bins) {
  ensure_dir(ctx.out);
  std::vector<Mask> masks;
  for (const auto& f : list_lnv(in)) masks.push_back(load_mask(f));
  const LongAxisReport r = long_axis_report(masks, static_cast<std::size_t>(bins > 0 ? bins : ctx.cfg.bins));
  write_file(ctx.out / "long_axis_hist.csv", histogram_csv(r));
  write_file(ctx.out / "long_axis_summary.json", summary_json(r));
  write_run_log(ctx, "measure", {}, {"long_axis_hist.csv", "long_axis_summary.json"});
  ctx.note("measured " + std::to_string(r.count) + " masks");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic lesion generation: TSDF latent diffusion, texture synthesis, CT compositing", "lnforge"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--seed", seed, "global seed (overrides general.seed)");
  app.add_option("--out", out_dir, "output directory (overrides paths.out_dir)");
  app.add_flag("--verbose,-v", verbose, "progress messages on stderr");
  app.add_option("--set", overrides, "override a configuration key: section.key=value")->take_all();

  std::string in_dir, real_dir, fake_dir, codec_path, ddpm_path, patch_dir, mask_dir, tex_codec, cond_codec, kind;
  std::string name;
  int dim = 0, k = 0, bins = 0, count = 0;
  SynthPaths sp;

  auto* tsdf = app.add_subcommand("tsdf", "convert binary masks to truncated SDF grids");
  tsdf->add_option("--in", in_dir, "directory of mask .lnv files")->required();

  auto* fit = app.add_subcommand("fit-codec", "fit a linear latent codec");
  fit->add_option("--in", in_dir, "directory of SDF, MASK or NORM .lnv files")->required();
  fit->add_option("--dim", dim, "latent dimension (default codec.shape_dim)");
  fit->add_option("--name", name, "output file stem (default codec)");

  auto* shape = app.add_subcommand("train-shape", "train the unconditional shape diffusion model");
  shape->add_option("--tsdf", in_dir, "directory of training SDF grids")->required();
  shape->add_option("--codec", codec_path, "shape codec")->required();
  shape->add_option("--name", name, "output file stem (default shape)");

  auto* adapter = app.add_subcommand("train-adapter", "train the TSDF refinement adapter");
  adapter->add_option("--tsdf", in_dir, "directory of training SDF grids")->required();
  adapter->add_option("--codec", codec_path, "shape codec")->required();
  adapter->add_option("--ddpm", ddpm_path, "shape model, for the combined loss report");
  adapter->add_option("--name", name, "output file stem (default adapter)");

  auto* texture = app.add_subcommand("train-texture", "train the mask-conditioned texture diffusion model");
  texture->add_option("--patches", patch_dir, "directory of NORM intensity patches")->required();
  texture->add_option("--masks", mask_dir, "directory of matching lesion masks")->required();
  texture->add_option("--texture-codec", tex_codec, "codec fit on the patches")->required();
  texture->add_option("--cond-codec", cond_codec, "codec fit on the mask TSDFs")->required();
  texture->add_option("--name", name, "output file stem (default texture)");

  auto* synth = app.add_subcommand("synth", "synthesize lesions and composite them into backgrounds");
  synth->add_option("--backgrounds", sp.backgrounds, "directory of HU background volumes")->required();
  synth->add_option("--regions", sp.regions, "directory of region masks named like the backgrounds")->required();
  synth->add_option("--count", sp.count, "number of lesions")->required();
  synth->add_option("--shape", sp.shape, "shape diffusion checkpoint")->required();
  synth->add_option("--codec", sp.codec, "shape codec")->required();
  synth->add_option("--adapter", sp.adapter, "adapter checkpoint (omit to skip refinement)");
  synth->add_option("--texture", sp.texture, "texture diffusion checkpoint")->required();
  synth->add_option("--texture-codec", sp.texture_codec, "texture codec")->required();
  synth->add_option("--cond-codec", sp.cond_codec, "condition codec")->required();

  auto* ipr = app.add_subcommand("eval-ipr", "improved precision and recall of two mask sets");
  ipr->add_option("--real", real_dir, "directory of reference masks")->required();
  ipr->add_option("--fake", fake_dir, "directory of generated masks")->required();
  ipr->add_option("--codec", codec_path, "codec providing the feature embedding")->required();
  ipr->add_option("--k", k, "neighbourhood size (default metric.k)");

  auto* measure = app.add_subcommand("measure", "long-axis histogram of a mask set");
  measure->add_option("--in", in_dir, "directory of mask .lnv files")->required();
  measure->add_option("--bins", bins, "histogram bins (default long_axis.bins)");

  auto* phantom = app.add_subcommand("phantom", "generate toy shapes, backgrounds or texture patches");
  phantom->add_option("--kind", kind, "shapes | backgrounds | textures")->required();
  phantom->add_option("--count", count, "number of items")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "lnforge: error[usage]: " << e.what() << "\n";
    return 2;
  }

  try {
    Context ctx;
    ctx.verbose = verbose;
    ctx.log = &err;
    if (!config_path.empty()) load_ini(ctx.cfg, config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) fail(Errc::config, o, "expected section.key=value");
      set_value(ctx.cfg, o.substr(0, eq), o.substr(eq + 1));
    }
    if (seed) ctx.cfg.seed = *seed;
    if (!out_dir.empty()) ctx.cfg.out_dir = out_dir;
    ctx.cfg.validate();
    ctx.out = ctx.cfg.out_dir.empty() ? fs::path(".") : fs::path(ctx.cfg.out_dir);

    auto stem = [&](const char* fallback) { return name.empty() ? std::string(fallback) : name; };
    if (app.got_subcommand(tsdf)) cmd_tsdf(ctx, in_dir);
    else if (app.got_subcommand(fit)) cmd_fit_codec(ctx, in_dir, dim, stem("codec"));
    else if (app.got_subcommand(shape)) cmd_train_shape(ctx, in_dir, codec_path, stem("shape"));
    else if (app.got_subcommand(adapter)) cmd_train_adapter(ctx, in_dir, codec_path, ddpm_path, stem("adapter"));
    else if (app.got_subcommand(texture))
      cmd_train_texture(ctx, patch_dir, mask_dir, tex_codec, cond_codec, stem("texture"));
    else if (app.got_subcommand(synth)) cmd_synth(ctx, sp);
    else if (app.got_subcommand(ipr)) cmd_eval_ipr(ctx, real_dir, fake_dir, codec_path, k);
    else if (app.got_subcommand(measure)) cmd_measure(ctx, in_dir, bins);
    else if (app.got_subcommand(phantom)) cmd_phantom(ctx, kind, count);
  } catch (const Error& e) {
    err << "lnforge: error[" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "lnforge: error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace lnforge::cli
