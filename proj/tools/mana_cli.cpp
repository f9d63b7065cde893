// Command-line entry points: train, infer, eval, bench.
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mana/commands.hpp"

namespace {

std::vector<std::size_t> parse_sizes(const std::string& text)
{
    std::vector<std::size_t> sizes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != item.size() || v == 0) throw mana::ConfigError("--sizes: bad entry '" + item + "'");
        sizes.push_back(v);
    }
    if (sizes.empty()) throw mana::ConfigError("--sizes: expected a comma-separated list");
    return sizes;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"MANA video super-resolution"};
    app.require_subcommand(1);

    std::string config;
    bool dry_run = false;
    auto* train = app.add_subcommand("train", "run the three-stage training procedure");
    train->add_option("--config", config, "key = value run configuration")->required();
    train->add_flag("--dry-run", dry_run, "print the resolved config and parameter count only");

    std::string checkpoint, in_dir, out_dir;
    bool pad = false;
    auto* infer = app.add_subcommand("infer", "super-resolve a PNG sequence");
    infer->add_option("--checkpoint", checkpoint)->required();
    infer->add_option("--in", in_dir, "directory of LR PNG frames")->required();
    infer->add_option("--out", out_dir, "directory for 4x PNG frames")->required();
    infer->add_flag("--pad", pad, "replicate end frames so every input frame gets an output");

    std::string eval_ckpt, pred_dir, lr_dir, hr_dir, eval_out;
    auto* eval = app.add_subcommand("eval", "PSNR / SSIM against ground truth");
    auto* ck = eval->add_option("--checkpoint", eval_ckpt);
    auto* pr = eval->add_option("--pred", pred_dir, "score existing predictions instead of a model");
    ck->excludes(pr);
    eval->add_option("--lr", lr_dir)->required();
    eval->add_option("--hr", hr_dir)->required();
    eval->add_option("--out", eval_out, "metrics CSV")->required();

    std::string sizes = "8,16,32", bench_out;
    std::size_t frames = 7, full_limit = 2'000'000;
    auto* bench = app.add_subcommand("bench", "correlation-buffer footprint of windowed vs full attention");
    bench->add_option("--sizes", sizes, "comma-separated H = W values");
    bench->add_option("--frames", frames);
    bench->add_option("--full-limit", full_limit, "largest full correlation buffer actually built");
    bench->add_option("--out", bench_out, "CSV path; a .md table is written beside it")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            mana::train_command(config, dry_run, std::cout);
        } else if (infer->parsed()) {
            const auto written = mana::infer_command(checkpoint, in_dir, out_dir, pad);
            std::cout << "wrote " << written.size() << " frame(s) to " << out_dir << "\n";
        } else if (eval->parsed()) {
            if (eval_ckpt.empty() == pred_dir.empty()) throw mana::ConfigError("eval: give --checkpoint or --pred");
            mana::EvalSource source;
            if (!eval_ckpt.empty()) source.checkpoint = eval_ckpt;
            else source.predictions = pred_dir;
            const auto rows = mana::eval_command(source, lr_dir, hr_dir, eval_out);
            for (const auto& r : rows)
                if (r.clip == "mean") std::cout << r.method << ": " << r.psnr_db << " dB, ssim " << r.ssim << "\n";
        } else if (bench->parsed()) {
            const auto rows = mana::bench_command(parse_sizes(sizes), frames, full_limit);
            mana::write_text_file(bench_out, mana::bench_csv(rows));
            std::filesystem::path md(bench_out);
            md.replace_extension(".md");
            const std::string table = mana::bench_markdown(rows);
            mana::write_text_file(md, table);
            std::cout << table;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
