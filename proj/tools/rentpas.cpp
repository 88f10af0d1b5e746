// rentpas command-line driver: ingest, train, score, report, serve, synth.
//
// Exit codes: 0 success, 2 validation failure (JSON error on stderr), 1 other failure.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "rentpas/http_server.hpp"
#include "rentpas/snapshot.hpp"
#include "rentpas/synth.hpp"

using namespace rentpas;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::FileUnreadable, "cannot write " + path);
  out << text;
}

std::vector<RegressorSpec> load_grid(const std::string& grid) {
  if (grid == "default") return default_gbt_grid();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_file(grid));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, "grid file: " + std::string(e.what()));
  }
  if (!j.is_array()) throw Error(ErrorKind::InvalidSpec, "grid file must hold a JSON array of specs");
  std::vector<RegressorSpec> specs;
  for (const auto& item : j) {
    auto spec = item.get<RegressorSpec>();
    spec.validate();
    specs.push_back(std::move(spec));
  }
  if (specs.empty()) throw Error(ErrorKind::EmptyGrid, grid);
  return specs;
}

std::vector<Listing> read_listings(const std::string& path, bool raw) {
  auto res = ingest_csv(path, raw ? SchemaMode::Raw : SchemaMode::Processed);
  if (res.report.rows_dropped > 0)
    std::cerr << "ingest: dropped " << res.report.rows_dropped << " of " << res.report.rows_read << " rows\n";
  if (res.listings.empty()) throw Error(ErrorKind::EmptyDataset, path + " has no usable listings");
  return std::move(res.listings);
}

int fail(int code, const std::string& name, const std::string& message) {
  std::cerr << nlohmann::json{{"error", name}, {"message", message}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rental price anomaly scoring"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Clean a listings CSV into the processed schema");
  std::string ingest_in, ingest_out, ingest_report;
  bool ingest_raw = false, ingest_processed = false;
  ingest->add_option("csv", ingest_in, "input CSV")->required();
  auto* raw_flag = ingest->add_flag("--raw", ingest_raw, "scraped schema (title, address, price, details, listing_by)");
  ingest->add_flag("--processed", ingest_processed, "processed schema (default)")->excludes(raw_flag);
  ingest->add_option("-o,--out", ingest_out, "listings CSV output (default stdout)");
  ingest->add_option("--report", ingest_report, "ingest report JSON output (default stderr)");

  // train
  auto* train = app.add_subcommand("train", "Select, evaluate and refit a model, then score every listing");
  std::string train_in, train_out = "snapshot.json", train_grid = "default";
  bool train_raw = false;
  TrainOptions topt;
  train->add_option("listings", train_in, "listings CSV (processed schema unless --raw)")->required();
  train->add_flag("--raw", train_raw, "input uses the scraped schema");
  train->add_option("--grid", train_grid, "'default' or a JSON file holding an array of model specs");
  train->add_option("--seed", topt.seed, "seed for split, folds and subsampling");
  train->add_option("--folds", topt.folds, "cross-validation folds")->check(CLI::Range(2, 1000));
  train->add_option("--q", topt.q, "initial classification threshold");
  train->add_flag("--override-preconditions", topt.override_preconditions, "score even when the holdout checks fail");
  train->add_option("--attribution-rows", topt.attribution_rows, "rows used for the attribution summary");
  train->add_option("-o,--out", train_out, "snapshot output path");

  // score
  auto* score = app.add_subcommand("score", "Score new listings against a stored snapshot");
  std::string score_snapshot, score_in, score_out;
  bool score_raw = false;
  score->add_option("snapshot", score_snapshot)->required();
  score->add_option("listings", score_in)->required();
  score->add_flag("--raw", score_raw, "input uses the scraped schema");
  score->add_option("-o,--out", score_out, "scored CSV output (default stdout)");

  // report
  auto* report = app.add_subcommand("report", "Summarize a snapshot");
  std::string report_snapshot;
  std::optional<double> report_q;
  bool report_as_json = false;
  std::size_t report_top = 10;
  report->add_option("snapshot", report_snapshot)->required();
  report->add_option("--q", report_q, "threshold for this report only");
  report->add_flag("--json", report_as_json, "emit JSON");
  report->add_option("--top", report_top, "rows in the most over/underpriced lists");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the snapshot API");
  std::string serve_snapshot, serve_ui, serve_host = "127.0.0.1";
  int serve_port = port_from_env();
  serve->add_option("snapshot", serve_snapshot)->required();
  serve->add_option("--port", serve_port, "listen port (default $PAS_PORT or 8080)")->check(CLI::Range(1, 65535));
  serve->add_option("--host", serve_host, "listen address");
  serve->add_option("--ui-dir", serve_ui, "static UI assets to mount at /");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic listings CSV with planted mispricings");
  std::uint64_t synth_seed = 7;
  std::size_t synth_n = 5000;
  std::string synth_out, synth_truth;
  synth->add_option("--seed", synth_seed);
  synth->add_option("--n", synth_n)->check(CLI::PositiveNumber);
  synth->add_option("-o,--out", synth_out, "listings CSV output (default stdout)");
  synth->add_option("--truth", synth_truth, "CSV of listing_id,planted (1 over, -1 under, 0 none)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "UsageError", e.what());
  }

  try {
    if (*ingest) {
      auto res = ingest_csv(ingest_in, ingest_raw ? SchemaMode::Raw : SchemaMode::Processed);
      write_text(ingest_out, write_listings_csv(res.listings));
      const auto rep = nlohmann::json(res.report).dump(2) + "\n";
      if (ingest_report.empty()) std::cerr << rep;
      else write_text(ingest_report, rep);
      if (res.listings.empty()) throw Error(ErrorKind::EmptyDataset, ingest_in + " has no usable listings");
    } else if (*train) {
      topt.grid = load_grid(train_grid);
      const auto snap = train_pipeline(read_listings(train_in, train_raw), topt);
      save_snapshot(snap, train_out);
      std::cerr << "selected " << snap.model.spec().label() << "; holdout R^2 "
                << snap.holdout.r2.value_or(std::nan("")) << " on " << snap.test_n << " rows; preconditions "
                << (snap.preconditions.passed ? "passed" : "overridden") << "\n";
      for (const auto& w : snap.warnings) std::cerr << "warning: " << w << "\n";
    } else if (*score) {
      const auto snap = load_snapshot(score_snapshot);
      const auto res = score_listings(snap, read_listings(score_in, score_raw));
      for (const auto& u : res.unseen)
        std::cerr << "warning: " << u.count << " listing(s) with unseen " << u.field << " '" << u.value
                  << "' scored with the baseline encoding\n";
      write_text(score_out, scored_csv(res.records));
    } else if (*report) {
      const auto snap = load_snapshot(report_snapshot);
      ReportOptions ropt{report_q, report_top};
      if (report_as_json) std::cout << report_json(snap, ropt).dump(2) << "\n";
      else std::cout << report_text(snap, ropt);
    } else if (*synth) {
      const auto fx = synthesize_fixture(synth_seed, synth_n);
      write_text(synth_out, write_listings_csv(fx.listings));
      if (!synth_truth.empty()) {
        std::string truth = "listing_id,planted\n";
        for (std::size_t i = 0; i < fx.listings.size(); ++i)
          truth += std::to_string(fx.listings[i].id) + "," + std::to_string(static_cast<int>(fx.planted[i])) + "\n";
        write_text(synth_truth, truth);
      }
    } else if (*serve) {
      Service service(load_snapshot(serve_snapshot));
      httplib::Server server;
      bind_routes(server, service, serve_ui);
      std::cerr << "serving on http://" << serve_host << ":" << serve_port << "\n";
      if (!server.listen(serve_host, serve_port)) throw std::runtime_error("cannot listen on port " + std::to_string(serve_port));
    }
  } catch (const Error& e) {
    return fail(2, std::string(e.name()), e.what());
  } catch (const std::exception& e) {
    return fail(1, "InternalError", e.what());
  }
  return 0;
}
