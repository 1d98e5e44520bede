// Command-line front end for the stacked sparse-autoencoder pipeline.
//
// Subcommands:
//   train           pretrain -> softmax head -> fine-tune -> checkpoint
//   eval            checkpoint (or a predictions file) + test data -> report
//   export-weights  checkpoint -> first-layer filter grid (PGM)
//   predict         checkpoint + image file -> one digit per line
//
// Every run writes a manifest with the fully resolved configuration into its
// --out directory; no subcommand writes anywhere else. Exit codes: 0 ok,
// 2 usage, 3 I/O, 4 file format, 5 invalid config/shape, 6 training abort.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "sae/sae.hpp"

namespace {

namespace fs = std::filesystem;

constexpr const char *kTrainImagesName = "train-images-idx3-ubyte";
constexpr const char *kTrainLabelsName = "train-labels-idx1-ubyte";
constexpr const char *kTestImagesName = "t10k-images-idx3-ubyte";
constexpr const char *kTestLabelsName = "t10k-labels-idx1-ubyte";

struct CliOptions {
    // common
    std::string out_dir;
    unsigned threads = 1;
    std::uint64_t seed = 1;

    // data sources
    std::string data_dir;
    std::string images_path;
    std::string labels_path;
    std::string checkpoint_path;
    std::string predictions_path;

    // architecture
    std::size_t hidden1 = 392;
    std::size_t hidden2 = 196;
    std::size_t subset = 0;  // total images, class-balanced; 0 = full set

    // per-stage training
    std::size_t ae1_epochs = 50;
    std::size_t ae2_epochs = 50;
    std::size_t head_epochs = 100;
    std::size_t ft_epochs = 30;
    double ae_lr = 0.5;
    double head_lr = 0.5;
    double ft_lr = 0.1;
    double momentum = 0.9;
    std::size_t batch = 128;
    double l2 = 1e-5;
    double rho = 0.05;
    double beta = 0.1;
};

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_lines(const fs::path &path, const std::vector<double> &values) {
    std::string content;
    for (double v : values) content += format_double(v) + "\n";
    sae::write_file(path.string(), content);
}

void write_manifest(const fs::path &out_dir,
                    const std::vector<std::pair<std::string, std::string>> &entries) {
    std::string content;
    for (const auto &[k, v] : entries) content += k + "=" + v + "\n";
    sae::write_file((out_dir / "manifest.txt").string(), content);
}

fs::path prepare_out_dir(const std::string &out) {
    if (out.empty()) throw sae::ConfigError("--out directory is required");
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw sae::IoError("cannot create output directory " + out + ": " + ec.message());
    return dir;
}

// Explicit file flags win over --data-dir (which itself defaults from
// SAE_DATA_DIR).
std::pair<std::string, std::string> resolve_data_files(const CliOptions &opt,
                                                       const char *images_name,
                                                       const char *labels_name) {
    std::string images = opt.images_path;
    std::string labels = opt.labels_path;
    if (images.empty() && !opt.data_dir.empty())
        images = (fs::path(opt.data_dir) / images_name).string();
    if (labels.empty() && !opt.data_dir.empty())
        labels = (fs::path(opt.data_dir) / labels_name).string();
    if (images.empty() || labels.empty())
        throw sae::ConfigError("no data files: pass --images/--labels or --data-dir "
                               "(or set SAE_DATA_DIR)");
    return {images, labels};
}

sae::TrainConfig stage_config(const CliOptions &opt, std::size_t epochs, double lr,
                              std::uint64_t stream) {
    sae::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = opt.batch;
    cfg.learning_rate = lr;
    cfg.momentum = opt.momentum;
    cfg.seed = sae::derive_seed(opt.seed, stream);
    cfg.hyper = sae::AeHyperparams{opt.l2, opt.rho, opt.beta};
    return cfg;
}

std::vector<std::pair<std::string, std::string>> common_manifest(const CliOptions &opt,
                                                                 const char *command) {
    return {
        {"command", command},
        {"seed", std::to_string(opt.seed)},
        {"threads", std::to_string(opt.threads)},
        {"out", opt.out_dir},
    };
}

int run_train(const CliOptions &opt) {
    const fs::path out = prepare_out_dir(opt.out_dir);
    const auto [images_path, labels_path] =
        resolve_data_files(opt, kTrainImagesName, kTrainLabelsName);

    // Every stage config is validated before any data is touched.
    if (opt.hidden1 < 1 || opt.hidden2 < 1)
        throw sae::ConfigError("hidden sizes must be >= 1");
    if (opt.subset % 10 != 0)
        throw sae::ConfigError("--subset must be a multiple of 10 (class-balanced), got " +
                               std::to_string(opt.subset));
    const sae::TrainConfig cfg_ae1 = stage_config(opt, opt.ae1_epochs, opt.ae_lr, 11);
    const sae::TrainConfig cfg_ae2 = stage_config(opt, opt.ae2_epochs, opt.ae_lr, 12);
    const sae::TrainConfig cfg_head = stage_config(opt, opt.head_epochs, opt.head_lr, 13);
    const sae::TrainConfig cfg_ft = stage_config(opt, opt.ft_epochs, opt.ft_lr, 14);
    cfg_ae1.validate();
    cfg_ae2.validate();
    cfg_head.validate();
    cfg_ft.validate();

    sae::Dataset train = sae::load_idx_pair(images_path, labels_path);
    std::cout << "loaded " << train.size() << " training images from " << images_path << "\n";
    if (opt.subset > 0) {
        train = sae::take_subset(train, opt.subset / 10, sae::derive_seed(opt.seed, 15));
        std::cout << "class-balanced subset: " << train.size() << " images\n";
    }

    const sae::PretrainResult pre =
        sae::pretrain(train, opt.hidden1, opt.hidden2, cfg_ae1, cfg_ae2);
    sae::save_layer((out / "ae1.sae").string(), pre.ae1.layer);
    sae::save_layer((out / "ae2.sae").string(), pre.ae2.layer);
    write_lines(out / "ae1_loss.txt", pre.ae1.loss_history);
    write_lines(out / "ae2_loss.txt", pre.ae2.loss_history);
    std::cout << "ae1: " << opt.hidden1 << " features, loss "
              << format_double(pre.ae1.loss_history.front()) << " -> "
              << format_double(pre.ae1.loss_history.back()) << "\n";
    std::cout << "ae2: " << opt.hidden2 << " features, loss "
              << format_double(pre.ae2.loss_history.front()) << " -> "
              << format_double(pre.ae2.loss_history.back()) << "\n";

    const sae::TrainedHead head = sae::train_head(pre.features2, train.labels, cfg_head);
    write_lines(out / "head_loss.txt", head.loss_history);
    std::cout << "head: cross-entropy " << format_double(head.loss_history.front()) << " -> "
              << format_double(head.loss_history.back()) << "\n";

    sae::StackedModel model{sae::encoder_of(pre.ae1.layer), sae::encoder_of(pre.ae2.layer),
                            head.head};
    const sae::FineTuneResult tuned = sae::fine_tune(std::move(model), train, cfg_ft);
    write_lines(out / "finetune_accuracy.txt", tuned.accuracy_history);
    std::cout << "fine-tune: training accuracy "
              << format_double(tuned.accuracy_history.front()) << " -> "
              << format_double(tuned.accuracy_history.back()) << "\n";

    sae::save_model((out / "model.sae").string(), tuned.model);
    std::cout << "checkpoint: " << (out / "model.sae").string() << "\n";

    auto manifest = common_manifest(opt, "train");
    manifest.insert(manifest.end(), {
        {"train_images", images_path},
        {"train_labels", labels_path},
        {"subset", std::to_string(opt.subset)},
        {"hidden1", std::to_string(opt.hidden1)},
        {"hidden2", std::to_string(opt.hidden2)},
        {"batch", std::to_string(opt.batch)},
        {"momentum", format_double(opt.momentum)},
        {"ae1_epochs", std::to_string(opt.ae1_epochs)},
        {"ae2_epochs", std::to_string(opt.ae2_epochs)},
        {"ae_lr", format_double(opt.ae_lr)},
        {"head_epochs", std::to_string(opt.head_epochs)},
        {"head_lr", format_double(opt.head_lr)},
        {"ft_epochs", std::to_string(opt.ft_epochs)},
        {"ft_lr", format_double(opt.ft_lr)},
        {"l2", format_double(opt.l2)},
        {"rho", format_double(opt.rho)},
        {"beta", format_double(opt.beta)},
    });
    write_manifest(out, manifest);
    return 0;
}

std::vector<int> read_predictions_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw sae::IoError("cannot open " + path);
    std::vector<int> pred;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int v = -1;
        const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
        if (res.ec != std::errc{} || res.ptr != line.data() + line.size())
            throw sae::ConfigError(path + ": not a digit line: '" + line + "'");
        pred.push_back(v);
    }
    return pred;
}

int run_eval(const CliOptions &opt) {
    const fs::path out = prepare_out_dir(opt.out_dir);

    std::vector<int> pred;
    std::string labels_path = opt.labels_path;
    std::string images_path;
    if (!opt.predictions_path.empty()) {
        // Score a prediction file against the label file.
        if (labels_path.empty() && !opt.data_dir.empty())
            labels_path = (fs::path(opt.data_dir) / kTestLabelsName).string();
        if (labels_path.empty())
            throw sae::ConfigError("eval --predictions also needs --labels");
        pred = read_predictions_file(opt.predictions_path);
    } else {
        if (opt.checkpoint_path.empty())
            throw sae::ConfigError("eval needs --checkpoint (or --predictions)");
        const auto [imgs, lbls] = resolve_data_files(opt, kTestImagesName, kTestLabelsName);
        images_path = imgs;
        labels_path = lbls;
        const sae::StackedModel model = sae::load_model(opt.checkpoint_path);
        const sae::Matrix images = sae::load_idx_images(images_path);
        pred = sae::predict(model, images);
        std::string lines;
        for (int p : pred) lines += std::to_string(p) + "\n";
        sae::write_file((out / "predictions.txt").string(), lines);
    }

    const std::vector<int> truth = sae::load_idx_labels(labels_path);
    const sae::EvalReport report = sae::evaluate(pred, truth);

    const std::string text = sae::render_text(report);
    sae::write_file((out / "confusion.txt").string(), text);
    sae::write_file((out / "metrics.txt").string(), sae::render_metrics(report));
    std::cout << text;
    std::cout << "accuracy=" << format_double(report.accuracy) << "\n";

    auto manifest = common_manifest(opt, "eval");
    manifest.insert(manifest.end(), {
        {"checkpoint", opt.checkpoint_path},
        {"predictions", opt.predictions_path},
        {"test_images", images_path},
        {"test_labels", labels_path},
    });
    write_manifest(out, manifest);
    return 0;
}

int run_export_weights(const CliOptions &opt) {
    const fs::path out = prepare_out_dir(opt.out_dir);
    // Tensor 0 is the first encoder weight matrix in both checkpoint kinds
    // (stacked model and single pretrained autoencoder).
    const std::vector<sae::Matrix> tensors = sae::read_checkpoint(opt.checkpoint_path);
    if (tensors.empty())
        throw sae::CheckpointError(sae::CheckpointError::Kind::BadContents,
                                   opt.checkpoint_path + ": no tensors");
    const fs::path pgm = out / "weights.pgm";
    sae::export_weight_grid(tensors[0], pgm.string());
    std::cout << "wrote " << pgm.string() << " (" << tensors[0].rows() << " filters)\n";

    auto manifest = common_manifest(opt, "export-weights");
    manifest.emplace_back("checkpoint", opt.checkpoint_path);
    write_manifest(out, manifest);
    return 0;
}

int run_predict(const CliOptions &opt) {
    const fs::path out = prepare_out_dir(opt.out_dir);
    const sae::StackedModel model = sae::load_model(opt.checkpoint_path);
    std::string images_path = opt.images_path;
    if (images_path.empty() && !opt.data_dir.empty())
        images_path = (fs::path(opt.data_dir) / kTestImagesName).string();
    if (images_path.empty()) throw sae::ConfigError("predict needs --images");
    const sae::Matrix images = sae::load_idx_images(images_path);
    const std::vector<int> pred = sae::predict(model, images);

    std::string lines;
    for (int p : pred) lines += std::to_string(p) + "\n";
    sae::write_file((out / "predictions.txt").string(), lines);
    std::cout << lines;

    auto manifest = common_manifest(opt, "predict");
    manifest.emplace_back("checkpoint", opt.checkpoint_path);
    manifest.emplace_back("images", images_path);
    write_manifest(out, manifest);
    return 0;
}

void add_common_options(CLI::App *cmd, CliOptions &opt) {
    cmd->add_option("--out", opt.out_dir, "output directory (all artifacts land here)")
        ->required();
    cmd->add_option("--seed", opt.seed, "run seed; identical seeds reproduce runs bit-exactly");
    cmd->add_option("--threads", opt.threads,
                    "matmul worker budget; results are identical for any value");
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"stacked sparse-autoencoder digit classifier"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file (flags override it)");

    CliOptions opt;

    CLI::App *train = app.add_subcommand("train", "full pipeline: pretrain, head, fine-tune");
    add_common_options(train, opt);
    train->add_option("--data-dir", opt.data_dir, "directory with the four canonical IDX files")
        ->envname("SAE_DATA_DIR");
    train->add_option("--images", opt.images_path, "training images (IDX)");
    train->add_option("--labels", opt.labels_path, "training labels (IDX)");
    train->add_option("--subset", opt.subset,
                      "class-balanced subset size in images, 0 = full set");
    train->add_option("--hidden1", opt.hidden1, "first autoencoder hidden size");
    train->add_option("--hidden2", opt.hidden2, "second autoencoder hidden size");
    train->add_option("--ae1-epochs", opt.ae1_epochs, "epochs for the first autoencoder");
    train->add_option("--ae2-epochs", opt.ae2_epochs, "epochs for the second autoencoder");
    train->add_option("--head-epochs", opt.head_epochs, "epochs for the softmax head");
    train->add_option("--ft-epochs", opt.ft_epochs, "fine-tuning epochs");
    train->add_option("--ae-lr", opt.ae_lr, "autoencoder learning rate");
    train->add_option("--head-lr", opt.head_lr, "softmax head learning rate");
    train->add_option("--ft-lr", opt.ft_lr, "fine-tuning learning rate");
    train->add_option("--momentum", opt.momentum, "SGD momentum for every stage");
    train->add_option("--batch", opt.batch, "mini-batch size for every stage");
    train->add_option("--l2", opt.l2, "L2 weight penalty (weights only, not biases)");
    train->add_option("--rho", opt.rho, "sparsity target mean activation");
    train->add_option("--beta", opt.beta, "sparsity penalty weight");

    CLI::App *eval = app.add_subcommand("eval", "confusion matrix + metrics on test data");
    add_common_options(eval, opt);
    eval->add_option("--checkpoint", opt.checkpoint_path, "stacked model checkpoint");
    eval->add_option("--data-dir", opt.data_dir, "directory with the canonical IDX files")
        ->envname("SAE_DATA_DIR");
    eval->add_option("--images", opt.images_path, "test images (IDX)");
    eval->add_option("--labels", opt.labels_path, "test labels (IDX)");
    eval->add_option("--predictions", opt.predictions_path,
                     "score an existing digit-per-line prediction file instead of a checkpoint");

    CLI::App *export_weights =
        app.add_subcommand("export-weights", "first-autoencoder filter grid as PGM");
    add_common_options(export_weights, opt);
    export_weights->add_option("--checkpoint", opt.checkpoint_path, "model or ae1 checkpoint")
        ->required();

    CLI::App *predict = app.add_subcommand("predict", "one digit per input image");
    add_common_options(predict, opt);
    predict->add_option("--checkpoint", opt.checkpoint_path, "stacked model checkpoint")
        ->required();
    predict->add_option("--data-dir", opt.data_dir, "directory with the canonical IDX files")
        ->envname("SAE_DATA_DIR");
    predict->add_option("--images", opt.images_path, "images to classify (IDX)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        sae::set_max_threads(opt.threads);
        if (train->parsed()) return run_train(opt);
        if (eval->parsed()) return run_eval(opt);
        if (export_weights->parsed()) return run_export_weights(opt);
        if (predict->parsed()) return run_predict(opt);
        std::cerr << "sae: no subcommand\n";
        return 2;
    } catch (const sae::IoError &e) {
        std::cerr << "sae: " << e.what() << "\n";
        return 3;
    } catch (const sae::IdxError &e) {
        std::cerr << "sae: " << e.what() << "\n";
        return 4;
    } catch (const sae::CheckpointError &e) {
        std::cerr << "sae: " << e.what() << "\n";
        return 4;
    } catch (const sae::ConfigError &e) {
        std::cerr << "sae: " << e.what() << "\n";
        return 5;
    } catch (const sae::ShapeError &e) {
        std::cerr << "sae: " << e.what() << "\n";
        return 5;
    } catch (const sae::TrainingError &e) {
        std::cerr << "sae: " << e.what() << "\n";
        return 6;
    } catch (const std::exception &e) {
        std::cerr << "sae: " << e.what() << "\n";
        return 1;
    }
}
