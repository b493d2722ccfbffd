#include "carotid/cli.hpp"
#include "carotid/io.hpp"
#include "carotid/session.hpp"
#include "carotid/volume_io.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

using namespace carotid;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("carotid_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string s(const fs::path& p) { return p.string(); }

// phantom -> centerline -> planes -> autofit on a short straight tube.
void small_pipeline(const fs::path& d, const std::vector<std::string>& extra_phantom = {}) {
  std::vector<std::string> ph = {"phantom", "--out", s(d / "study"), "--kind", "straight_tube", "--length", "16",
                                 "--timepoints", "4"};
  ph.insert(ph.end(), extra_phantom.begin(), extra_phantom.end());
  ASSERT_EQ(invoke(ph).code, 0);
  ASSERT_EQ(invoke({"centerline", "--study", s(d / "study/study.json"), "--start", "0,0,1", "--end", "0,0,15", "--out",
                 s(d / "cl.json")}).code, 0);
  ASSERT_EQ(invoke({"planes", "--centerline", s(d / "cl.json"), "--study", s(d / "study/study.json"), "--out",
                 s(d / "session.json")}).code, 0);
  const CliResult fit = invoke({"autofit", "--session", s(d / "session.json"), "--study", s(d / "study/study.json")});
  ASSERT_EQ(fit.code, 0) << fit.err;
}

std::size_t csv_rows(const fs::path& p) {
  const std::string text = read_file(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1;
}

}  // namespace

TEST(Cli, HelpOnEverySubcommandExitsZero) {
  for (const char* sub : {"phantom", "centerline", "planes", "autofit", "biomarkers", "pathlines", "mesh", "serve"}) {
    const CliResult r = invoke({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("Usage"), std::string::npos) << sub;
  }
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, UsageErrorsExitOne) {
  CliResult r = invoke({"planes", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  r = invoke({"biomarkers", "--session", "x.json"});  // --out missing
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--out is required"), std::string::npos);
  EXPECT_EQ(invoke({"centerline", "--study", "a", "--out", "b", "--start", "1,2", "--end", "1,2,3"}).code, 1);
  EXPECT_EQ(invoke({"--threads", "x", "planes"}).code, 1);
}

TEST(Cli, DataErrorsExitTwo) {
  const fs::path d = fresh_dir("data_errors");
  const CliResult r = invoke({"biomarkers", "--session", s(d / "missing.json"), "--out", s(d / "r.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("IoFailure"), std::string::npos);
  write_file_atomic(d / "broken.json", "{");
  EXPECT_EQ(invoke({"biomarkers", "--session", s(d / "broken.json"), "--out", s(d / "r.csv")}).code, 2);
  EXPECT_FALSE(fs::exists(d / "r.csv"));
}

TEST(Cli, PipelineReportsPhantomWallThickness) {
  const fs::path d = fresh_dir("pipeline");
  small_pipeline(d);
  const Session session = load_session(d / "session.json");
  ASSERT_FALSE(session.annotations.empty());
  EXPECT_EQ(session.study_id, "phantom-straight_tube");
  EXPECT_TRUE(stale_volumes(session, d).empty());

  const CliResult r = invoke({"biomarkers", "--session", s(d / "session.json"), "--study", s(d / "study/study.json"), "--out",
                     s(d / "report.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(csv_rows(d / "report.csv"), session.annotations.size());
  const Json report = Json::parse(read_file(d / "report.json"));
  int within = 0;
  for (const Json& row : report["rows"]) within += std::abs(row["vwt_mean"].get<double>() - 1.0) <= 0.15;
  EXPECT_GE(within * 10, static_cast<int>(report["rows"].size()) * 9);
}

TEST(Cli, CsvRowsCountUsableAnnotations) {
  const fs::path d = fresh_dir("usable");
  small_pipeline(d);
  Session session = load_session(d / "session.json");
  ASSERT_GE(session.annotations.size(), 3u);
  session.annotations[0].usable = false;
  session.annotations[2].usable = false;
  save_session(session, d / "session.json");
  ASSERT_EQ(invoke({"biomarkers", "--session", s(d / "session.json"), "--out", s(d / "r.csv")}).code, 0);
  EXPECT_EQ(csv_rows(d / "r.csv"), session.annotations.size() - 2);
}

TEST(Cli, AutofitKeepsEditedAnnotations) {
  const fs::path d = fresh_dir("keep");
  small_pipeline(d);
  Session session = load_session(d / "session.json");
  session.annotations[1].source = AnnotationSource::auto_corrected;
  session.annotations[1].lumen->seeds[0] *= 0.95;
  save_session(session, d / "session.json");
  const SliceAnnotation edited = load_session(d / "session.json").annotations[1];
  ASSERT_EQ(invoke({"autofit", "--session", s(d / "session.json"), "--study", s(d / "study/study.json")}).code, 0);
  EXPECT_EQ(load_session(d / "session.json").annotations[1], edited);
  ASSERT_EQ(invoke({"autofit", "--session", s(d / "session.json"), "--study", s(d / "study/study.json"), "--overwrite"}).code, 0);
  EXPECT_EQ(load_session(d / "session.json").annotations[1].source, AnnotationSource::automatic);
}

TEST(Cli, ConfigMirrorsFlagsAndFlagsWin) {
  const fs::path d = fresh_dir("config");
  small_pipeline(d);
  write_file_atomic(d / "cfg.json", R"({"threads": 2, "planes": {"spacing": 4.0, "fov": 20}})");
  ASSERT_EQ(invoke({"--config", s(d / "cfg.json"), "planes", "--centerline", s(d / "cl.json"), "--study",
                 s(d / "study/study.json"), "--out", s(d / "a.json")}).code, 0);
  Session a = load_session(d / "a.json");
  EXPECT_DOUBLE_EQ(a.parameters.plane_spacing, 4.0);
  EXPECT_DOUBLE_EQ(a.parameters.fov, 20.0);

  ASSERT_EQ(invoke({"planes", "--config", s(d / "cfg.json"), "--spacing", "3", "--centerline", s(d / "cl.json"),
                 "--study", s(d / "study/study.json"), "--out", s(d / "b.json")}).code, 0);
  Session b = load_session(d / "b.json");
  EXPECT_DOUBLE_EQ(b.parameters.plane_spacing, 3.0);
  EXPECT_DOUBLE_EQ(b.parameters.fov, 20.0);

  write_file_atomic(d / "bad.json", R"({"planes": {"spacnig": 4.0}})");
  EXPECT_EQ(invoke({"--config", s(d / "bad.json"), "planes", "--centerline", s(d / "cl.json"), "--study",
                 s(d / "study/study.json"), "--out", s(d / "c.json")}).code, 1);
}

TEST(Cli, SeedControlsPhantomNoise) {
  const fs::path d = fresh_dir("seed");
  const auto make = [&](const std::string& dir, const std::string& seed) {
    return invoke({"--seed", seed, "phantom", "--kind", "straight_tube", "--length", "8", "--timepoints", "2", "--noise",
                "5", "--out", s(d / dir)}).code;
  };
  ASSERT_EQ(make("a", "7"), 0);
  ASSERT_EQ(make("b", "7"), 0);
  ASSERT_EQ(make("c", "8"), 0);
  EXPECT_EQ(read_file(d / "a/bb.nii.gz"), read_file(d / "b/bb.nii.gz"));
  EXPECT_NE(read_file(d / "a/bb.nii.gz"), read_file(d / "c/bb.nii.gz"));
  EXPECT_EQ(read_file(d / "a/study.json"), read_file(d / "b/study.json"));
}

TEST(Cli, PathlinesAndMeshArtifacts) {
  const fs::path d = fresh_dir("artifacts");
  small_pipeline(d, {"--waveform", "flat"});
  const CliResult p = invoke({"pathlines", "--study", s(d / "study/study.json"), "--session", s(d / "session.json"), "--plane",
                     "1", "--seeds", "4", "--duration", "4", "--out", s(d / "p.cpln"), "--stats", s(d / "stats.json")});
  ASSERT_EQ(p.code, 0) << p.err;
  const std::string bin = read_file(d / "p.cpln");
  EXPECT_EQ(bin.substr(0, 4), "CPLN");
  EXPECT_LE(Json::parse(read_file(d / "stats.json"))["max_speed"].get<double>(), 1.0 + 1e-9);

  const CliResult m = invoke({"mesh", "--study", s(d / "study/study.json"), "--session", s(d / "session.json"), "--out",
                     s(d / "inner.ply"), "--outer", s(d / "outer.ply"), "--json", s(d / "mesh.json")});
  ASSERT_EQ(m.code, 0) << m.err;
  EXPECT_TRUE(fs::exists(d / "outer.ply"));
  const Json mesh = Json::parse(read_file(d / "mesh.json"));
  EXPECT_EQ(mesh["inner"]["tag"], "inner_wall");
  EXPECT_NE(read_file(d / "inner.ply").find("property double quality"), std::string::npos);

  EXPECT_EQ(invoke({"pathlines", "--study", s(d / "study/study.json"), "--session", s(d / "session.json"), "--plane",
                 "999", "--out", s(d / "q.cpln")}).code, 2);
}
