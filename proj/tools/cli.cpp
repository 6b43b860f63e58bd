#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "nld/array_file.hpp"
#include "nld/calibration.hpp"
#include "nld/error.hpp"
#include "nld/metrics.hpp"
#include "nld/run_config.hpp"
#include "nld/runner.hpp"
#include "nld/simulate.hpp"

namespace nld::cli {

namespace {

// `--config` must be known before the other options get their defaults, so
// it is picked out of argv ahead of the real parse.
std::string find_config_path(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

// "4" -> (4, 1); "2x2" -> (2, 2)
std::pair<int, int> parse_acceleration(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) return {std::stoi(text), 1};
    return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
  } catch (const std::exception&) {
    fail(ErrorCode::invalid_argument, "bad acceleration '" + text + "' (use R or RxR)");
  }
}

std::ofstream open_text(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::io, "cannot open " + path + " for writing");
  return f;
}

std::vector<double> magnitude_of(const Array& a) {
  const ComplexImage img = image_from_array(a);
  return magnitude(img);
}

// Smallest R whose lattice of rows is fully acquired.
int infer_row_acceleration(const SamplingMask& mask) {
  for (std::size_t r = 1; r <= mask.h; ++r) {
    for (std::size_t phase = 0; phase < r; ++phase) {
      bool ok = true;
      for (std::size_t y = phase; y < mask.h && ok; y += r)
        for (std::size_t x = 0; x < mask.w && ok; ++x) ok = mask.sampled(y, x);
      if (ok) return static_cast<int>(r);
    }
  }
  fail(ErrorCode::geometry_mismatch, "mask has no uniform 1-D row lattice");
}

struct SimulateArgs {
  SimulationConfig sim;
  std::string accel;
  std::string out_dir = ".";
};

struct MapsArgs {
  std::string kspace, mask, out;
  EspiritOptions espirit;
};

struct ReconArgs {
  std::string kspace, mask, maps, out, history_csv;
  ReconConfig recon;
};

struct GrappaArgs {
  std::string kspace, mask, out, image;
  GrappaGeometry geometry;
  double ridge = 1e-6;
};

struct EvalArgs {
  std::string ref, test, out_csv;
};

void run_simulate(const SimulateArgs& a, std::ostream& out) {
  SimulationConfig sim = a.sim;
  if (!a.accel.empty()) std::tie(sim.r, sim.r2) = parse_acceleration(a.accel);
  PhantomSpec spec{sim.h, sim.w, sim.phase_strength, sim.noise, sim.seed};
  spec.validate();
  const ComplexImage truth = shepp_logan(sim.h, sim.w, sim.phase_strength, sim.seed);
  const CoilSensitivities maps = simulate_coils(sim.coils, sim.h, sim.w, sim.seed + 1);
  const SamplingMask mask = sample_pattern(sim.pattern, sim.h, sim.w, sim.r, sim.r2, sim.acs);
  const Acquisition acq = simulate_acquisition(truth, maps, mask, sim.noise, sim.seed + 2);

  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  write_array((dir / "truth.nldt").string(), to_array(truth));
  write_array((dir / "maps.nldt").string(), to_array(maps));
  write_array((dir / "mask.nldt").string(), to_array(mask));
  write_array((dir / "kspace_full.nldt").string(), to_array(acq.full));
  write_array((dir / "kspace_und.nldt").string(), to_array(acq.undersampled));
  out << "simulated " << sim.h << "x" << sim.w << ", " << sim.coils
      << " coils, effective acceleration " << format_double(mask.acceleration()) << "\n";
}

void run_maps(const MapsArgs& a, std::ostream& out) {
  const MultiCoilKSpace d = kspace_from_array(read_array(a.kspace));
  const SamplingMask mask = mask_from_array(read_array(a.mask));
  const AcsBlock acs = extract_acs(d, mask);
  const CoilSensitivities maps = espirit_maps(acs, d.h, d.w, a.espirit);
  write_array(a.out, to_array(maps));
  std::size_t support = 0;
  for (auto v : maps.support) support += v;
  out << "maps from " << acs.data.h << "x" << acs.data.w << " ACS block, support " << support
      << "/" << maps.support.size() << " pixels\n";
}

void run_recon(const ReconArgs& a, std::ostream& out) {
  const MultiCoilKSpace d = kspace_from_array(read_array(a.kspace));
  const SamplingMask mask = mask_from_array(read_array(a.mask));
  const CoilSensitivities maps = maps_from_array(read_array(a.maps));
  const ReconResult res = reconstruct(d, maps, mask, a.recon);
  write_array(a.out, to_array(res.image));
  if (!a.history_csv.empty()) {
    auto f = open_text(a.history_csv);
    f << "iter,data,reg,total\n";
    for (std::size_t i = 0; i < res.loss_history.size(); ++i) {
      const auto& r = res.loss_history[i];
      f << (i + 1) << ',' << format_double(r.data) << ',' << format_double(r.reg) << ','
        << format_double(r.total) << '\n';
    }
  }
  const auto& last = res.loss_history.back();
  out << "recon: " << res.iterations_run << " iterations, final data term "
      << format_double(last.data) << ", total " << format_double(last.total) << "\n";
}

void run_grappa(const GrappaArgs& a, std::ostream& out) {
  const MultiCoilKSpace d = kspace_from_array(read_array(a.kspace));
  const SamplingMask mask = mask_from_array(read_array(a.mask));
  const int r = infer_row_acceleration(mask);
  MultiCoilKSpace filled = d;
  if (r > 1) {
    const GrappaKernel kernel = grappa_calibrate(extract_acs(d, mask), r, a.geometry, a.ridge);
    filled = grappa_apply(d, kernel, mask);
  }
  write_array(a.out, to_array(filled));
  std::string image = a.image;
  if (image.empty()) {
    std::filesystem::path p(a.out);
    image = (p.parent_path() / (p.stem().string() + "_rsos.nldt")).string();
  }
  write_array(image, magnitude_array(rsos_image(filled), d.h, d.w));
  out << "grappa: R=" << r << ", filled k-space -> " << a.out << ", rsos image -> " << image
      << "\n";
}

void run_eval(const EvalArgs& a, std::ostream& out) {
  const Array ref_a = read_array(a.ref);
  const Array test_a = read_array(a.test);
  if (ref_a.shape != test_a.shape || ref_a.shape.size() != 2) {
    fail(ErrorCode::shape_mismatch, "eval: images must be 2-D with equal extents");
  }
  const auto ref = magnitude_of(ref_a);
  const auto test = magnitude_of(test_a);
  const MetricReport r = evaluate(ref, test, ref_a.shape[0], ref_a.shape[1]);
  const std::string row =
      format_double(r.psnr_db) + ',' + format_double(r.ssim) + ',' + format_double(r.nrmse) + '\n';
  if (!a.out_csv.empty()) {
    auto f = open_text(a.out_csv);
    f << "psnr_db,ssim,nrmse\n" << row;
  }
  out << "psnr_db,ssim,nrmse\n" << row;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig base;
  try {
    if (const auto path = find_config_path(argc, argv); !path.empty()) {
      base = load_run_config(path);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"Untrained-network parallel MRI reconstruction"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "key = value run configuration file");

  SimulateArgs sim_args;
  sim_args.sim = base.sim;
  std::string pattern = to_string(base.sim.pattern);
  auto* sim = app.add_subcommand("simulate", "Phantom, coil maps, mask and k-space");
  sim->add_option("--h", sim_args.sim.h, "Rows (phase encode)");
  sim->add_option("--w", sim_args.sim.w, "Columns (readout)");
  sim->add_option("--coils", sim_args.sim.coils, "Number of receive coils");
  sim->add_option("--pattern", pattern, "uniform1d | uniform2d");
  sim->add_option("--r", sim_args.accel, "Acceleration, R or RxR");
  sim->add_option("--acs", sim_args.sim.acs, "ACS lines (1-D) or square side (2-D)");
  sim->add_option("--noise", sim_args.sim.noise, "Complex noise std per k-space sample");
  sim->add_option("--phase-strength", sim_args.sim.phase_strength, "Synthetic phase amplitude");
  sim->add_option("--seed", sim_args.sim.seed, "Seed");
  sim->add_option("--out-dir", sim_args.out_dir, "Output directory");

  MapsArgs maps_args;
  auto* maps = app.add_subcommand("maps", "ESPIRiT coil sensitivities from the ACS block");
  maps->add_option("--kspace", maps_args.kspace)->required();
  maps->add_option("--mask", maps_args.mask)->required();
  maps->add_option("--out", maps_args.out)->required();
  maps->add_option("--kernel", maps_args.espirit.kernel, "Calibration kernel size");
  maps->add_option("--sv-thresh", maps_args.espirit.sv_thresh, "Relative singular value cut");
  maps->add_option("--eig-thresh", maps_args.espirit.eig_thresh, "Eigenvalue support cut");

  ReconArgs recon_args;
  recon_args.recon = base.recon;
  double lambda = -1.0;
  bool regularized = false;
  auto* recon = app.add_subcommand("recon", "Fit a randomly initialized U-net to the data");
  recon->add_option("--kspace", recon_args.kspace)->required();
  recon->add_option("--mask", recon_args.mask)->required();
  recon->add_option("--maps", recon_args.maps)->required();
  recon->add_option("--out", recon_args.out)->required();
  recon->add_option("--history-csv", recon_args.history_csv, "Loss history CSV");
  recon->add_option("--filters", recon_args.recon.unet.filters);
  recon->add_option("--depth", recon_args.recon.unet.depth);
  recon->add_option("--kernel", recon_args.recon.unet.kernel);
  recon->add_option("--slope", recon_args.recon.unet.slope);
  recon->add_option("--iters", recon_args.recon.iterations);
  recon->add_option("--lr", recon_args.recon.lr);
  recon->add_option("--lambda", lambda, "Weight of ||theta||^2; > 0 selects the regularized loss");
  recon->add_flag("--regularized", regularized, "Regularized loss with the configured lambda");
  recon->add_option("--seed", recon_args.recon.seed);
  recon->add_option("--checkpoint-every", recon_args.recon.checkpoint_every);
  recon->add_option("--checkpoint-dir", recon_args.recon.checkpoint_dir);
  recon->add_flag("--plateau-stop", recon_args.recon.plateau_stop);

  GrappaArgs grappa_args;
  auto* grappa = app.add_subcommand("grappa", "GRAPPA fill of a uniform 1-D pattern");
  grappa->add_option("--kspace", grappa_args.kspace)->required();
  grappa->add_option("--mask", grappa_args.mask)->required();
  grappa->add_option("--out", grappa_args.out, "Filled k-space")->required();
  grappa->add_option("--image", grappa_args.image, "rsos image (default: <out>_rsos.nldt)");
  grappa->add_option("--source-lines", grappa_args.geometry.source_lines);
  grappa->add_option("--taps", grappa_args.geometry.readout_taps);
  grappa->add_option("--ridge", grappa_args.ridge);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "PSNR, SSIM and NRMSE of magnitude images");
  eval->add_option("--ref", eval_args.ref)->required();
  eval->add_option("--test", eval_args.test)->required();
  eval->add_option("--out-csv", eval_args.out_csv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*sim) {
      sim_args.sim.pattern = parse_pattern_kind(pattern);
      run_simulate(sim_args, out);
    } else if (*maps) {
      run_maps(maps_args, out);
    } else if (*recon) {
      if (lambda >= 0.0) {
        recon_args.recon.lambda = lambda;
        recon_args.recon.regularized = lambda > 0.0;
      }
      if (regularized) recon_args.recon.regularized = true;
      run_recon(recon_args, out);
    } else if (*grappa) {
      run_grappa(grappa_args, out);
    } else if (*eval) {
      run_eval(eval_args, out);
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace nld::cli
