// specbias: spectrum of logit surfaces, toy experiment, and second-descent analysis.

#include <iostream>

#include "CLI11.hpp"

#include "specbias/cli.hpp"
#include "specbias/dataio.hpp"

namespace sc = specbias::cli;

int main(int argc, char** argv) {
  CLI::App app{"Directional Fourier spectra of classifier logits and training-curve analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sc::kVersion);

  sc::ToyCommand toy;
  auto* toy_cmd = app.add_subcommand(
      "toy", "Train the 3-100-100-2 ReLU net on the two-line task and record on/off-manifold spectra");
  toy_cmd->add_option("--seed", toy.seed, "Seed for the perturbed point and initialization")->capture_default_str();
  toy_cmd->add_option("--epochs", toy.epochs, "Minimum full-batch Adam steps (one step = one epoch)")
      ->capture_default_str();
  toy_cmd->add_option("--post-memorization", toy.post_memorization,
                      "Keep training until this many epochs after memorization")
      ->capture_default_str();
  toy_cmd->add_option("--samples", toy.samples, "Points per line for the DFT, N")->capture_default_str();
  toy_cmd->add_option("--lr", toy.learning_rate, "Adam learning rate")->capture_default_str();
  toy_cmd->add_option("--out", toy.out_dir, "Output directory")->required();
  toy_cmd->add_flag("--svg", toy.svg, "Also write on/off-manifold heatmaps");
  toy_cmd->add_option("--dump-every", toy.dump_every,
                      "Write train/test logit-ray dumps every this many epochs (0 = off)")
      ->capture_default_str();
  toy_cmd->add_option("--dump-rays", toy.dump_rays, "Rays per dump epoch")->capture_default_str();
  toy_cmd->add_option("--half-width", toy.half_width, "Ray half width h for dumps")->capture_default_str();

  sc::SpectrumCommand spectrum;
  auto* spectrum_cmd =
      app.add_subcommand("spectrum", "Compute R_k per epoch from a logit-ray dump (natural log, k = 0..N/2)");
  spectrum_cmd->add_option("--dump", spectrum.dump, "Input .sprd dump")->required();
  spectrum_cmd->add_option("--out", spectrum.out, "Output spectrum CSV")->required();

  sc::AnalyzeCommand analyze;
  std::string test_col, pert_col;
  auto* analyze_cmd = app.add_subcommand(
      "analyze", "Patience search for T_R,min and T_R,peak (and optional T_E, T_dP) in epoch series");
  analyze_cmd->add_option("--spectrum", analyze.spectrum, "Spectrum CSV (epoch,R_0..R_K)")->required();
  analyze_cmd->add_option("--test-error", analyze.test_error, "Series CSV with the test error E_t");
  analyze_cmd->add_option("--test-error-column", test_col, "Column of --test-error to use (default: first)");
  analyze_cmd->add_option("--perturbed-error", analyze.perturbed_error, "Series CSV with the perturbed error P_t");
  analyze_cmd->add_option("--perturbed-error-column", pert_col, "Column of --perturbed-error to use");
  analyze_cmd->add_option("--patience", analyze.patience, "Patience in epochs")->capture_default_str();
  analyze_cmd->add_option("--smooth", analyze.smooth_window, "Trailing mean-filter window for R_k,t")
      ->capture_default_str();
  analyze_cmd->add_option("--error-smooth", analyze.error_smooth_window, "Trailing mean-filter window for E_t")
      ->capture_default_str();
  analyze_cmd->add_option("--rate-half-window", analyze.rate_half_window, "Half window dT for the mean of dP_t")
      ->capture_default_str();
  analyze_cmd->add_option("--k-first", analyze.k_first, "First frequency with alpha_k = 1")->capture_default_str();
  analyze_cmd->add_option("--k-last", analyze.k_last, "Last frequency with alpha_k = 1")->capture_default_str();
  analyze_cmd->add_option("--out", analyze.out, "Output JSON report")->required();

  sc::PccCommand pcc;
  std::string pcc_col;
  auto* pcc_cmd = app.add_subcommand("pcc", "Short-time Pearson correlation between two series files");
  pcc_cmd->add_option("--x", pcc.x, "First input CSV")->required();
  pcc_cmd->add_option("--y", pcc.y, "Second input CSV")->required();
  pcc_cmd->add_option("--window", pcc.window, "Window length l")->capture_default_str();
  pcc_cmd->add_flag("--matrix", pcc.matrix, "Inputs are spectrum CSVs; average the PCC over k");
  pcc_cmd->add_option("--column", pcc_col, "Series column to compare (default: first)");
  pcc_cmd->add_option("--k-first", pcc.k_first, "First frequency averaged in --matrix mode")->capture_default_str();
  pcc_cmd->add_option("--k-last", pcc.k_last, "Last frequency averaged in --matrix mode")->capture_default_str();
  pcc_cmd->add_option("--out", pcc.out, "Output CSV")->required();

  sc::NoiseCommand noise;
  auto* noise_cmd = app.add_subcommand("noise", "Relabel a random fraction of labels to a different class");
  noise_cmd->add_option("--labels", noise.labels, "CSV with a 'label' column")->required();
  noise_cmd->add_option("--classes", noise.classes, "Number of classes C")->capture_default_str();
  noise_cmd->add_option("--fraction", noise.fraction, "Fraction of labels to perturb")->capture_default_str();
  noise_cmd->add_option("--seed", noise.seed, "Random seed")->capture_default_str();
  noise_cmd->add_option("--out", noise.out, "Output CSV (index,label,original,perturbed)")->required();

  sc::HeatmapCommand heatmap;
  auto* heatmap_cmd = app.add_subcommand("heatmap", "Render a spectrum CSV as an SVG heatmap with contours");
  heatmap_cmd->add_option("--spectrum", heatmap.spectrum, "Spectrum CSV")->required();
  heatmap_cmd->add_option("--out", heatmap.out, "Output SVG")->required();
  heatmap_cmd->add_option("--levels", heatmap.levels, "Contour levels of R_k")->delimiter(',');
  heatmap_cmd->add_flag("--linear-axis", heatmap.linear_axis, "Linear instead of logarithmic epoch axis");
  heatmap_cmd->add_option("--max-columns", heatmap.max_columns, "Downsample to at most this many epochs (0 = all)")
      ->capture_default_str();
  heatmap_cmd->add_option("--title", heatmap.title, "Plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? sc::kOk : sc::kUsage;
  }

  try {
    if (*toy_cmd) {
      sc::cmd_toy(toy);
    } else if (*spectrum_cmd) {
      sc::cmd_spectrum(spectrum);
    } else if (*analyze_cmd) {
      if (!test_col.empty()) analyze.test_error_column = test_col;
      if (!pert_col.empty()) analyze.perturbed_error_column = pert_col;
      sc::cmd_analyze(analyze);
    } else if (*pcc_cmd) {
      if (!pcc_col.empty()) pcc.column = pcc_col;
      sc::cmd_pcc(pcc);
    } else if (*noise_cmd) {
      sc::cmd_noise(noise);
    } else if (*heatmap_cmd) {
      sc::cmd_heatmap(heatmap);
    }
  } catch (const sc::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return sc::kUsage;
  } catch (const sc::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return sc::kInputFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sc::kRuntime;
  }
  return sc::kOk;
}
