#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const std::string& capture = "") {
    std::string cmd = std::string(USSL_CLI_BIN) + " " + args;
    if (!capture.empty()) cmd += " > " + capture + " 2>&1";
    else cmd += " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string fresh_dir(const std::string& name) {
    const std::string dir = testing::TempDir() + name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const std::string kTinyOverrides =
    " --set total_epochs=6 --set warmup_epochs=2 --set vae_epochs=10";

}  // namespace

TEST(Cli, NoArgumentsPrintsUsageAndFails) {
    const std::string dir = fresh_dir("ussl_cli_usage");
    const int rc = run_cli("", dir + "/out.txt");
    EXPECT_NE(rc, 0);
    const std::string out = slurp(dir + "/out.txt");
    EXPECT_NE(out.find("Usage"), std::string::npos) << out;
}

TEST(Cli, UnknownSubcommandFails) {
    EXPECT_NE(run_cli("frobnicate"), 0);
}

TEST(Cli, UnknownFlagFails) {
    EXPECT_NE(run_cli("gen-data --bogus 1 --out /tmp/x"), 0);
}

TEST(Cli, MissingInputFileFailsWithPath) {
    const std::string dir = fresh_dir("ussl_cli_missing");
    const int rc = run_cli("train --scenario " + dir + "/nope.csv --out " + dir, dir + "/out.txt");
    EXPECT_NE(rc, 0);
    EXPECT_NE(slurp(dir + "/out.txt").find("nope.csv"), std::string::npos);
}

TEST(Cli, GenDataIsDeterministicByteForByte) {
    const std::string a = fresh_dir("ussl_cli_gen_a");
    const std::string b = fresh_dir("ussl_cli_gen_b");
    ASSERT_EQ(run_cli("gen-data --seed 7 --out " + a), 0);
    ASSERT_EQ(run_cli("gen-data --seed 7 --out " + b), 0);
    const std::string csv_a = slurp(a + "/scenario.csv");
    ASSERT_FALSE(csv_a.empty());
    EXPECT_EQ(csv_a, slurp(b + "/scenario.csv"));
    EXPECT_EQ(slurp(a + "/scenario_spec.txt"), slurp(b + "/scenario_spec.txt"));
}

TEST(Cli, ManifestIsWrittenAndFinalized) {
    const std::string dir = fresh_dir("ussl_cli_manifest");
    ASSERT_EQ(run_cli("gen-data --seed 3 --out " + dir), 0);
    const std::string manifest = slurp(dir + "/manifest.json");
    EXPECT_NE(manifest.find("\"status\": \"ok\""), std::string::npos) << manifest;
    EXPECT_NE(manifest.find("\"subcommand\": \"gen-data\""), std::string::npos);
    EXPECT_NE(manifest.find("scenario.csv"), std::string::npos);
}

TEST(Cli, PipelineStagesChainTogether) {
    const std::string data = fresh_dir("ussl_cli_pipe_data");
    const std::string vae = fresh_dir("ussl_cli_pipe_vae");
    const std::string trained = fresh_dir("ussl_cli_pipe_train");
    const std::string scored = fresh_dir("ussl_cli_pipe_score");

    ASSERT_EQ(run_cli("gen-data --seed 5 --out " + data), 0);
    ASSERT_EQ(run_cli("pretrain-vae --scenario " + data + "/scenario.csv --seed 5 --out " + vae +
                      kTinyOverrides),
              0);
    EXPECT_TRUE(fs::exists(vae + "/vae_params.txt"));
    EXPECT_TRUE(fs::exists(vae + "/ukd_scores.csv"));
    const std::string ukd_header = slurp(vae + "/ukd_scores.csv").substr(0, 22);
    EXPECT_EQ(ukd_header, "index,L_re,w_d,is_ukd\n");

    ASSERT_EQ(run_cli("train --scenario " + data + "/scenario.csv --seed 5 --vae-params " + vae +
                      "/vae_params.txt --out " + trained + kTinyOverrides),
              0);
    EXPECT_TRUE(fs::exists(trained + "/params.txt"));
    EXPECT_TRUE(fs::exists(trained + "/history.csv"));
    EXPECT_TRUE(fs::exists(trained + "/weights.csv"));
    {
        std::ifstream in(trained + "/history.csv");
        std::string header;
        std::getline(in, header);
        EXPECT_EQ(header, "epoch,l_ce,l_ssl,l_adv,l_dom,alpha,beta,mean_w_uc,mean_w_d");
        std::size_t rows = 0;
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        EXPECT_EQ(rows, 6u);
    }

    ASSERT_EQ(run_cli("score --scenario " + data + "/scenario.csv --params " + trained +
                      "/params.txt --seed 5 --out " + scored),
              0);
    const std::string scores = slurp(scored + "/ukc_scores.csv");
    EXPECT_EQ(scores.substr(0, 30), "index,d_avg,p_ood,w_uc,is_ukc\n");
}

TEST(Cli, EvaluateWritesReports) {
    const std::string dir = fresh_dir("ussl_cli_eval");
    ASSERT_EQ(run_cli("evaluate --seeds 2 --out " + dir + kTinyOverrides +
                      " --set unlabeled_mini=0"),
              1);  // unknown key is an error
    ASSERT_EQ(run_cli("evaluate --seeds 2 --out " + dir + kTinyOverrides), 0);
    EXPECT_TRUE(fs::exists(dir + "/report.txt"));
    EXPECT_TRUE(fs::exists(dir + "/report.json"));
    const std::string report = slurp(dir + "/report.txt");
    EXPECT_NE(report.find("schema: ussl-report/1"), std::string::npos);
    const std::string json = slurp(dir + "/report.json");
    EXPECT_NE(json.find("\"aggregate\""), std::string::npos);
    EXPECT_NE(json.find("\"timing\""), std::string::npos);
}

TEST(Cli, TrainSelfContainedWithoutVaeParams) {
    const std::string data = fresh_dir("ussl_cli_self_data");
    const std::string trained = fresh_dir("ussl_cli_self_train");
    ASSERT_EQ(run_cli("gen-data --seed 9 --out " + data), 0);
    ASSERT_EQ(run_cli("train --scenario " + data + "/scenario.csv --seed 9 --out " + trained +
                      kTinyOverrides),
              0);
    EXPECT_TRUE(fs::exists(trained + "/params.txt"));
}
