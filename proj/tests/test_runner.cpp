#include "scm/runner.hpp"

#include "scm/generator.hpp"
#include "scm/io.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

using namespace scm;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("scm_runner_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_generated_files(const GeneratedPanel& generated, const std::string& panel_path,
                           const std::string& covs_path) {
    std::ofstream panel(panel_path);
    panel << "unit,period,value\n";
    for (size_t j = 0; j < generated.panel.unit_ids.size(); ++j) {
        for (size_t t = 0; t < generated.panel.period_ids.size(); ++t) {
            panel << generated.panel.unit_ids[j] << "," << generated.panel.period_ids[t] << ","
                  << format_double(generated.panel.outcomes(static_cast<Eigen::Index>(j),
                                                            static_cast<Eigen::Index>(t)))
                  << "\n";
        }
    }
    std::ofstream covs(covs_path);
    covs << "unit,predictor,value\n";
    for (size_t j = 0; j < generated.covariates.unit_ids.size(); ++j) {
        for (size_t k = 0; k < generated.covariates.predictor_names.size(); ++k) {
            covs << generated.covariates.unit_ids[j] << ","
                 << generated.covariates.predictor_names[k] << ","
                 << format_double(generated.covariates.values(static_cast<Eigen::Index>(j),
                                                              static_cast<Eigen::Index>(k)))
                 << "\n";
        }
    }
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "missing file: " << path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

GeneratedPanel small_instance() {
    GeneratorSpec spec;
    spec.unit_count = 7;
    spec.period_count = 14;
    spec.t0 = 8;
    spec.noise_scale = 0.02;
    spec.planted_weights = testutil::vec({0.5, 0.5});
    spec.planted_effect = testutil::vec({0.15});
    spec.seed = 404;
    return generate_panel(spec);
}

RunConfig base_config(const TempDir& dir, const GeneratedPanel& generated) {
    RunConfig config;
    config.panel_path = dir.file("panel.csv");
    config.covariates_path = dir.file("covariates.csv");
    config.outcome_kind = OutcomeKind::real;
    config.treated_unit = generated.treated_unit;
    config.t0 = 8;
    config.scheme = LagScheme::pretreatment_mean;
    config.with_covariates = true;
    config.solver = testutil::lean_settings();
    config.quiet = true;
    return config;
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("minimal run writes weights, gaps, and metadata only") {
    TempDir dir("minimal");
    auto generated = small_instance();
    write_generated_files(generated, dir.file("panel.csv"), dir.file("covariates.csv"));

    RunConfig config = base_config(dir, generated);
    config.out_dir = dir.file("out");
    const RunOutcome outcome = run_analysis(config);
    CHECK(outcome.exit_code == kExitOk);
    CHECK(outcome.written_files ==
          std::vector<std::string>{"weights.csv", "gaps.csv", "run_metadata.json"});
    CHECK(fs::exists(config.out_dir + "/weights.csv"));
    CHECK(fs::exists(config.out_dir + "/gaps.csv"));
    CHECK(fs::exists(config.out_dir + "/run_metadata.json"));
    CHECK_FALSE(fs::exists(config.out_dir + "/placebo.csv"));
}

TEST_CASE("placebo run emits one data row per unit") {
    TempDir dir("placebo");
    auto generated = small_instance();
    write_generated_files(generated, dir.file("panel.csv"), dir.file("covariates.csv"));

    RunConfig config = base_config(dir, generated);
    config.out_dir = dir.file("out");
    config.run_placebo = true;
    const RunOutcome outcome = run_analysis(config);
    CHECK(outcome.exit_code == kExitOk);

    const std::string placebo = slurp(config.out_dir + "/placebo.csv");
    const auto lines = std::count(placebo.begin(), placebo.end(), '\n');
    CHECK(lines == 1 + 7);  // header + one row per unit
}

TEST_CASE("validation failure returns exit code 1 and writes nothing") {
    TempDir dir("invalid");
    auto generated = small_instance();
    write_generated_files(generated, dir.file("panel.csv"), dir.file("covariates.csv"));

    RunConfig config = base_config(dir, generated);
    config.out_dir = dir.file("out");
    config.t0 = 14;  // no post-period
    const RunOutcome outcome = run_analysis(config);
    CHECK(outcome.exit_code == kExitValidationFailure);
    CHECK_FALSE(outcome.messages.empty());
    CHECK_FALSE(fs::exists(config.out_dir + "/weights.csv"));
}

TEST_CASE("share-kind loading flags out-of-range values") {
    TempDir dir("sharekind");
    auto generated = small_instance();  // real-valued outcomes around [0,1] plus effect
    write_generated_files(generated, dir.file("panel.csv"), dir.file("covariates.csv"));

    RunConfig config = base_config(dir, generated);
    config.out_dir = dir.file("out");
    config.outcome_kind = OutcomeKind::share;

    // Push one value clearly outside [0,1] so share validation must fire.
    {
        std::ofstream panel(dir.file("panel.csv"), std::ios::app);
        panel << "";  // keep file ending intact
    }
    Panel p = load_panel(dir.file("panel.csv"), OutcomeKind::real);
    p.outcomes(1, 1) = 1.7;
    std::ofstream panel(dir.file("panel.csv"));
    panel << "unit,period,value\n";
    for (size_t j = 0; j < p.unit_ids.size(); ++j) {
        for (size_t t = 0; t < p.period_ids.size(); ++t) {
            panel << p.unit_ids[j] << "," << p.period_ids[t] << ","
                  << format_double(p.outcomes(static_cast<Eigen::Index>(j),
                                              static_cast<Eigen::Index>(t)))
                  << "\n";
        }
    }
    panel.close();

    const RunOutcome outcome = run_analysis(config);
    CHECK(outcome.exit_code == kExitValidationFailure);
}

TEST_CASE("full pipeline runs are byte-identical for a fixed seed") {
    TempDir dir("determinism");
    auto generated = small_instance();
    write_generated_files(generated, dir.file("panel.csv"), dir.file("covariates.csv"));

    RunConfig config = base_config(dir, generated);
    config.run_placebo = true;
    config.run_loo = true;
    config.run_specsearch = true;
    config.solver.rng_seed = 2025;

    config.out_dir = dir.file("run1");
    const RunOutcome first = run_analysis(config);
    config.out_dir = dir.file("run2");
    const RunOutcome second = run_analysis(config);
    CHECK(first.exit_code == second.exit_code);
    REQUIRE(first.written_files == second.written_files);

    for (const auto& name : first.written_files) {
        std::string a = slurp(dir.file("run1") + "/" + name);
        std::string b = slurp(dir.file("run2") + "/" + name);
        if (name == "run_metadata.json") {
            // The config echo embeds the output directory, which differs by
            // construction; everything else must match.
            const auto strip = [](std::string s, const std::string& needle) {
                for (size_t at = s.find(needle); at != std::string::npos; at = s.find(needle)) {
                    s.erase(at, needle.size());
                }
                return s;
            };
            a = strip(a, dir.file("run1"));
            b = strip(b, dir.file("run2"));
        }
        CHECK_MESSAGE(a == b, "file differs between runs: " << name);
    }
}

TEST_CASE("diff analysis writes the event-time tables") {
    TempDir dir("diff");
    auto generated = small_instance();
    write_generated_files(generated, dir.file("panel.csv"), dir.file("covariates.csv"));

    GeneratorSpec spec_b;
    spec_b.unit_count = 7;
    spec_b.period_count = 14;
    spec_b.t0 = 6;
    spec_b.noise_scale = 0.02;
    spec_b.seed = 505;
    auto generated_b = generate_panel(spec_b);
    write_generated_files(generated_b, dir.file("panel_b.csv"), dir.file("covariates_b.csv"));

    RunConfig config = base_config(dir, generated);
    config.out_dir = dir.file("out");
    config.run_diff = true;
    config.panel_b_path = dir.file("panel_b.csv");
    config.t0_b = 6;
    config.origin_a = "3";
    config.origin_b = "2";

    const RunOutcome outcome = run_analysis(config);
    CHECK(outcome.exit_code == kExitOk);
    CHECK(fs::exists(config.out_dir + "/diff_placebo.csv"));
    CHECK(fs::exists(config.out_dir + "/diff.csv"));
    const std::string diff_placebo = slurp(config.out_dir + "/diff_placebo.csv");
    CHECK(std::count(diff_placebo.begin(), diff_placebo.end(), '\n') == 1 + 7);
}

}  // TEST_SUITE
