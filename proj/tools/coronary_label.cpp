#include <iostream>

#include <CLI11.hpp>

#include "coronary/cli.hpp"

namespace cli = coronary::cli;

int main(int argc, char** argv) {
    CLI::App app{"Anatomical labelling of coronary artery centerline trees", std::string(cli::kToolName)};
    app.set_version_flag("--version", std::string(cli::kToolVersion));
    app.require_subcommand(1);

    cli::GenerateOptions gen;
    std::string gen_config, gen_out;
    auto* generate = app.add_subcommand("generate", "Generate synthetic labelled trees");
    generate->add_option("--config", gen_config, "Generator config JSON")->check(CLI::ExistingFile);
    generate->add_option("--seed", gen.seed, "Master seed (overrides config and CORONARY_SEED)");
    generate->add_option("--count", gen.count, "Number of trees")->check(CLI::NonNegativeNumber);
    generate->add_option("--out", gen_out, "Output directory")->required();

    cli::TrainOptions train;
    std::string train_data, train_config, train_out;
    auto* tr = app.add_subcommand("train", "Train one model per cross-validation fold");
    tr->add_option("--data", train_data, "Directory of labelled trees")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--config", train_config, "Training config JSON")->check(CLI::ExistingFile);
    tr->add_option("--out", train_out, "Model output directory")->required();
    tr->add_option("--epochs", train.epochs);
    tr->add_option("--batch-size", train.batch_size);
    tr->add_option("--gamma", train.gamma, "Focal loss focusing parameter");
    tr->add_option("--lr", train.learning_rate);
    tr->add_option("--seed", train.seed);
    tr->add_option("--folds", train.folds)->check(CLI::Range(2, 100));
    tr->add_option("--workers", train.workers, "Folds trained in parallel")->check(CLI::Range(1, 64));

    cli::LabelOptions label;
    std::string label_tree, label_models, label_out;
    auto* lb = app.add_subcommand("label", "Label a tree file or a directory of trees");
    lb->add_option("--tree", label_tree, "Tree file or directory")->required()->check(CLI::ExistingPath);
    lb->add_option("--models", label_models, "Directory of *.model files")->required()->check(CLI::ExistingDirectory);
    lb->add_option("--out", label_out, "Output file, or directory for directory input")->required();
    lb->add_option("--ri-threshold", label.ri_threshold, "Ramus gate distance in mm");
    lb->add_flag("--no-post", label.no_post, "Emit raw argmax labels");

    cli::EvalOptions ev;
    std::string eval_labels, eval_truth, eval_out;
    auto* el = app.add_subcommand("eval", "Score label files against ground truth");
    el->add_option("--labels", eval_labels, "Directory of label files")->required()->check(CLI::ExistingDirectory);
    el->add_option("--truth", eval_truth, "Directory of labelled trees")->required()->check(CLI::ExistingDirectory);
    el->add_option("--out", eval_out, "Directory for report.json and report.txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kOk : cli::kUsage;
    }

    try {
        if (generate->parsed()) {
            if (!gen_config.empty()) gen.config = gen_config;
            gen.out = gen_out;
            const auto manifest = cli::cmd_generate(gen);
            std::cout << "wrote " << manifest["artifacts"].size() << " trees to " << gen_out << '\n';
        } else if (tr->parsed()) {
            train.data = train_data;
            if (!train_config.empty()) train.config = train_config;
            train.out = train_out;
            cli::cmd_train(train);
            std::cout << "wrote " << train.folds << " models to " << train_out << '\n';
        } else if (lb->parsed()) {
            label.tree = label_tree;
            label.models = label_models;
            label.out = label_out;
            cli::cmd_label(label);
        } else if (el->parsed()) {
            ev.labels = eval_labels;
            ev.truth = eval_truth;
            if (!eval_out.empty()) ev.out = eval_out;
            std::cout << cli::cmd_eval(ev).table;
        }
    } catch (...) {
        return cli::report_exception();
    }
    return cli::kOk;
}
