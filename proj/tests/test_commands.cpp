#include <doctest.h>

#include <sstream>

#include "mana/checkpoint.hpp"
#include "mana/commands.hpp"
#include "mana/nn.hpp"
#include "mana/ops.hpp"
#include "support/temp_dir.hpp"

namespace fs = std::filesystem;
using mana::Tensor;

namespace {

mana::ModelConfig tiny()
{
    mana::ModelConfig cfg;
    cfg.channels = 8;
    cfg.frames = 3;
    cfg.memory_size = 6;
    cfg.enc_blocks = 1;
    cfg.dec_blocks = 1;
    return cfg;
}

const char* kTinyRun = R"(seed = 3
model.C = 8
model.T = 3
model.N = 6
model.enc_blocks = 1
model.dec_blocks = 1
train.stage1.iterations = 2
train.stage2.iterations = 2
train.stage3.iterations = 2
data.hr_size = 32
data.clips = 2
data.heldout = 1
)";

/// n LR frames of a synthetic clip (and their 4x originals) as PNG files.
void write_sequence(const fs::path& lr, const fs::path& hr, std::size_t n)
{
    mana::SynthSpec spec;
    spec.frames = n | 1;
    spec.hr_height = 48;
    spec.hr_width = 48;
    spec.seed = 5;
    const auto hr_frames = mana::synth_hr_frames(spec);
    const auto lr_frames = mana::degrade(hr_frames);
    fs::create_directories(lr);
    if (!hr.empty()) fs::create_directories(hr);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string name = "im" + std::to_string(i + 1) + ".png";
        mana::write_png(lr / name, mana::select(lr_frames, i));
        if (!hr.empty()) mana::write_png(hr / name, mana::select(hr_frames, i));
    }
}

} // namespace

TEST_CASE("dry run prints the resolved config and writes nothing")
{
    const TempDir dir;
    const auto cfg_path = dir / "run.cfg";
    mana::write_text_file(cfg_path, std::string(kTinyRun) + "output.dir = " + (dir / "out").string() + "\n");
    std::ostringstream out;
    CHECK_FALSE(mana::train_command(cfg_path, true, out).has_value());
    CHECK(out.str().find("model.C = 8") != std::string::npos);
    CHECK(out.str().find("# parameters = " + std::to_string(mana::parameter_count(tiny()))) != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("malformed config names the key")
{
    const TempDir dir;
    mana::write_text_file(dir / "bad.cfg", "seed = 1\nmodel.widht = 4\n");
    std::ostringstream out;
    try {
        mana::train_command(dir / "bad.cfg", true, out);
        FAIL("expected a ConfigError");
    } catch (const mana::ConfigError& e) {
        CHECK(std::string(e.what()).find("model.widht") != std::string::npos);
    }
    CHECK_THROWS_AS(mana::train_command(dir / "missing.cfg", true, out), mana::ConfigError);
}

TEST_CASE("train writes checkpoint, loss log and metrics")
{
    const TempDir dir;
    auto cfg = mana::parse_run_config(kTinyRun);
    cfg.output_dir = dir / "run";
    std::ostringstream out;
    const auto outcome = mana::train_run(cfg, out);
    CHECK(fs::exists(outcome.checkpoint));
    const auto model = mana::load_checkpoint(outcome.checkpoint);
    CHECK(model.config == tiny());

    const auto loss = read_text(outcome.loss_log);
    CHECK(std::count(loss.begin(), loss.end(), '\n') == 7);

    const auto metrics = read_text(outcome.metrics);
    CHECK(metrics.find(",mana,") != std::string::npos);
    CHECK(metrics.find(",bilinear,") != std::string::npos);
    CHECK(metrics.find("mean,mana,") != std::string::npos);
    REQUIRE(outcome.heldout.size() == 4);
}

TEST_CASE("inference windows")
{
    CHECK(mana::inference_centers(7, 7, false) == std::vector<std::size_t>{3});
    CHECK(mana::inference_centers(9, 7, false) == std::vector<std::size_t>{3, 4, 5});
    CHECK(mana::inference_centers(6, 7, false).empty());
    CHECK(mana::inference_centers(4, 3, true).size() == 4);

    Tensor<float> all({4, 1, 1, 1}, std::vector<float>{0, 1, 2, 3});
    CHECK(mana::center_window(all, 0, 3).same_values(Tensor<float>({3, 1, 1, 1}, std::vector<float>{0, 0, 1})));
    CHECK(mana::center_window(all, 3, 3).same_values(Tensor<float>({3, 1, 1, 1}, std::vector<float>{2, 3, 3})));
}

TEST_CASE("infer writes 4x frames named after their centers")
{
    const TempDir dir;
    mana::save_checkpoint(mana::init_model<float>(tiny(), 1), dir / "m.ckpt");
    write_sequence(dir / "lr", {}, 5);

    const auto written = mana::infer_command(dir / "m.ckpt", dir / "lr", dir / "out");
    REQUIRE(written.size() == 3);
    CHECK(written.front().filename() == "im2.png");
    CHECK(written.back().filename() == "im4.png");
    const auto img = mana::read_png(written.front());
    CHECK(img.shape() == mana::Shape{3, 48, 48});

    CHECK(mana::infer_command(dir / "m.ckpt", dir / "lr", dir / "padded", true).size() == 5);

    fs::create_directories(dir / "short");
    mana::write_png(dir / "short" / "a.png", Tensor<float>({3, 12, 12}, 0.5f));
    CHECK_THROWS_AS(mana::infer_command(dir / "m.ckpt", dir / "short", dir / "x"), mana::DataError);
}

TEST_CASE("eval of a ground-truth copy is perfect")
{
    const TempDir dir;
    write_sequence(dir / "lr" / "seqA", dir / "hr" / "seqA", 4);
    write_sequence(dir / "lr" / "seqB", dir / "hr" / "seqB", 3);

    const auto rows = mana::eval_command({std::nullopt, dir / "hr"}, dir / "lr", dir / "hr", dir / "m.csv");
    std::vector<mana::MetricRow> pred, bilinear;
    for (const auto& r : rows)
        if (r.clip != "mean") (r.method == "prediction" ? pred : bilinear).push_back(r);
    CHECK(pred.size() == 7);
    CHECK(bilinear.size() == 7);
    for (const auto& r : pred) {
        CHECK(r.psnr_db == mana::kPsnrCap);
        CHECK(r.ssim == doctest::Approx(1.0).epsilon(1e-12));
    }
    double mean_bilinear = 0;
    for (const auto& r : bilinear) mean_bilinear += r.psnr_db / 7;
    CHECK(rows.back().clip == "mean");
    CHECK(rows.back().method == "bilinear");
    CHECK(rows.back().psnr_db == doctest::Approx(mean_bilinear).epsilon(1e-12));
    CHECK(read_text(dir / "m.csv").find("seqB/im1,prediction,100,") != std::string::npos);

    mana::save_checkpoint(mana::init_model<float>(tiny(), 1), dir / "m.ckpt");
    const auto model_rows = mana::eval_command({dir / "m.ckpt", std::nullopt}, dir / "lr", dir / "hr", {});
    // 4 frames give 2 windows of 3, 3 frames give 1.
    CHECK(model_rows.size() == 2 * 3 + 2);
    CHECK(model_rows[0].clip == "seqA/im2");
    CHECK(model_rows[0].method == "mana");
    CHECK(model_rows[1].method == "bilinear");
    CHECK(model_rows[1].psnr_db == doctest::Approx(bilinear[0].psnr_db));

    CHECK_THROWS_AS(mana::eval_command({}, dir / "lr", dir / "hr", {}), mana::ConfigError);
}

TEST_CASE("bench counts")
{
    const auto rows = mana::bench_command({8, 16}, 7);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].windowed_elements == 145152);
    CHECK(rows[1].full_elements == 458752);
    CHECK(rows[1].full_measured);
    CHECK(rows[1].ratio == doctest::Approx(256.0 / 81));

    const auto same = mana::bench_command({9}, 1);
    CHECK(same[0].windowed_elements == same[0].full_elements);
    CHECK(same[0].ratio == 1.0);

    const auto projected = mana::bench_command({32}, 7, 1000);
    CHECK_FALSE(projected[0].full_measured);
    CHECK(projected[0].full_elements == 1024u * 1024 * 7);
    CHECK(mana::bench_csv(projected).find("skipped (projected)") != std::string::npos);
}

TEST_CASE("desk preset training lowers the reconstruction loss")
{
    const TempDir dir;
    mana::RunConfig cfg;
    cfg.output_dir = dir / "desk";
    std::ostringstream out;
    const auto outcome = mana::train_run(cfg, out);
    CHECK(fs::exists(outcome.checkpoint));
    const auto& s1 = outcome.log.stages[0];
    const auto& s3 = outcome.log.stages[2];
    REQUIRE_FALSE(s1.empty());
    REQUIRE_FALSE(s3.empty());
    CHECK(s3.back().loss < s1.front().loss);
}
