// icdh: command-line front end for data generation, training, consultation,
// visualization, feedback, retraining and the HTTP service.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "icdh/config.hpp"
#include "icdh/dataset.hpp"
#include "icdh/model_io.hpp"
#include "icdh/server.hpp"
#include "icdh/service.hpp"
#include "icdh/training.hpp"

namespace fs = std::filesystem;
using namespace icdh;

namespace {

httplib::Server* g_server = nullptr;

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::trunc);
    out << text;
    if (!out) throw IoError("cannot write " + path.string());
}

int family_arg(const std::string& s, const Palette& p)
{
    if (!s.empty() && std::all_of(s.begin(), s.end(), ::isdigit)) {
        const int id = std::stoi(s);
        if (id < 0 || id >= kFamilyCount) throw ValidationError("family id out of range: " + s);
        return id;
    }
    const int id = p.find(s);
    if (id < 0) throw ValidationError("unknown family: " + s);
    return id;
}

AppConfig base_config(const std::string& config_path) { return load_config(config_path); }

struct GenerateArgs {
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    double noise = kDefaultLabelNoise;
    std::string out;
};

int run_generate(const GenerateArgs& a)
{
    const auto d = synth_generate(a.n, a.seed, a.noise);
    write_dataset(d, a.out);
    std::cout << "wrote " << d.size() << " records to " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::string history;
    int epochs = 200;
    double lr = 0.01;
    double fallback_lr = kFallbackLearningRate;
    double dropout = 0.1;
    int batch = 32;
    double split = 0.8;
    std::uint64_t seed = 0;
    bool quiet = false;
};

int run_train(const TrainArgs& a)
{
    const auto d = read_dataset(a.data);
    const auto [tr, va] = split_shuffle(d, a.split, a.seed);
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.learning_rate = a.lr;
    cfg.dropout_rate = a.dropout;
    cfg.batch_size = a.batch;
    cfg.seed = a.seed;
    const auto start = std::chrono::steady_clock::now();
    auto on_epoch = [&](const EpochStats& e) {
        if (!a.quiet && (e.epoch % 10 == 0 || e.epoch == 1)) {
            std::printf("epoch %3d  loss %.4f  val_acc %.3f\n", e.epoch, e.train_loss, e.val_accuracy);
        }
    };
    auto run = train_with_fallback(a.seed, tr, va, cfg, a.fallback_lr, on_epoch);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto model = run.result.model;
    model.model_version = 1;
    save_model(model, a.out);
    auto meta = training_run_to_json(run, a.seed, tr.size(), va.size());
    meta["seconds"] = secs;
    meta["dataset"] = a.data;
    const std::string history = a.history.empty() ? a.out + ".history.json" : a.history;
    write_text(history, meta.dump(2) + "\n");
    if (run.fell_back) {
        std::cout << "learning rate " << a.lr << " diverged; retrained at " << run.config.learning_rate << "\n";
    }
    std::printf("trained %zu epochs in %.1fs, final val accuracy %.4f, lr %g\n", run.result.history.size(), secs,
                run.result.history.back().val_accuracy, run.config.learning_rate);
    std::cout << "model: " << a.out << "\nhistory: " << history << "\n";
    return 0;
}

struct ConsultArgs {
    std::string image, detections, detector_url, attrs, model, store, out, config;
    std::uint64_t seed = 0;
    std::optional<double> min_confidence;
};

int run_consult(const ConsultArgs& a)
{
    AppConfig cfg = base_config(a.config);
    cfg.store_dir = a.store.empty() ? (fs::path(a.out) / "store").string() : a.store;
    cfg.model_path = a.model;
    cfg.kmeans.seed = a.seed;
    if (a.min_confidence) cfg.min_confidence = *a.min_confidence;
    fs::create_directories(a.out);
    Service svc(cfg);

    ConsultationRequest req;
    req.image = read_file_bytes(a.image);
    parse_attributes(read_json_file(a.attrs), req.attrs, req.prefs);
    if (!a.detections.empty()) req.detections = read_json_file(a.detections);
    if (!a.detector_url.empty()) req.detector_url = a.detector_url;
    const auto r = svc.consult(req);

    auto doc = result_document(r, svc.palette());
    for (std::size_t i = 0; i < r.renders.size(); ++i) {
        const std::string name =
            "render_" + std::to_string(i + 1) + "_" + svc.palette()[r.renders[i].family_id].name + ".png";
        write_file_bytes((fs::path(a.out) / name).string(), r.renders[i].png);
        doc["renders"][i]["file"] = name;
    }
    write_text(fs::path(a.out) / "result.json", doc.dump(2) + "\n");
    std::cout << "consultation " << r.consultation_id << " (model v" << r.model_version << ")\n";
    for (const auto& c : r.recommendation.choices) {
        std::printf("  %-8s %.4f\n", svc.palette()[c.family_id].name.c_str(), c.probability);
    }
    if (r.warning) std::cout << "warning: " << *r.warning << "\n";
    return 0;
}

struct VisualizeArgs {
    std::string image, detections, out, config;
    std::vector<std::string> families;
    std::uint64_t seed = 0;
    std::optional<double> min_confidence;
};

int run_visualize(const VisualizeArgs& a)
{
    AppConfig cfg = base_config(a.config);
    if (a.min_confidence) cfg.min_confidence = *a.min_confidence;
    const Palette palette = cfg.palette_path.empty() ? default_palette() : load_palette(cfg.palette_path);
    const auto img = read_image(a.image);
    std::vector<BoundingBox> boxes;
    if (!a.detections.empty()) {
        const auto set = filter_furniture(load_detections_file(a.detections, img.width, img.height), cfg.min_confidence);
        for (const auto& d : set.detections) boxes.push_back(d.box);
    }
    std::vector<int> ids;
    for (const auto& f : a.families) ids.push_back(family_arg(f, palette));
    if (ids.empty()) {
        for (int i = 0; i < kFamilyCount; ++i) ids.push_back(i);
    }
    fs::create_directories(a.out);
    const auto mask = segment_wall(img, boxes, cfg.segmentation);
    Image mask_img(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (mask.at(x, y)) mask_img.set(x, y, {255, 255, 255});
    write_png((fs::path(a.out) / "wall_mask.png").string(), mask_img);

    nlohmann::json doc = {{"image", {{"width", img.width}, {"height", img.height}}},
                          {"wall_pixels", mask.count()},
                          {"renders", nlohmann::json::array()}};
    for (int id : ids) {
        const auto png = encode_png(recolor(img, mask, palette[id]));
        const std::string name = "render_" + palette[id].name + ".png";
        write_file_bytes((fs::path(a.out) / name).string(), png);
        doc["renders"].push_back(
            {{"family_id", id}, {"family", palette[id].name}, {"file", name}, {"png_sha256", sha256_hex(png)}});
    }
    write_text(fs::path(a.out) / "visualize.json", doc.dump(2) + "\n");
    std::cout << "wall pixels: " << mask.count() << "; wrote " << ids.size() << " renders to " << a.out << "\n";
    return 0;
}

struct FeedbackArgs {
    std::string store, id, accept, config;
    bool reject = false;
    std::uint64_t seed = 0;
};

int run_feedback(const FeedbackArgs& a)
{
    AppConfig cfg = base_config(a.config);
    cfg.store_dir = a.store;
    Service svc(cfg);
    std::optional<int> accepted;
    if (!a.accept.empty()) accepted = family_arg(a.accept, svc.palette());
    const auto ack = svc.record_feedback(a.id, accepted);
    std::cout << (ack.accepted ? "accepted" : "rejected") << "; dataset rows: " << ack.dataset_rows << "\n";
    return 0;
}

struct RetrainArgs {
    std::string store, config;
    std::uint64_t seed = 0;
    std::optional<int> epochs;
};

int run_retrain(const RetrainArgs& a)
{
    AppConfig cfg = base_config(a.config);
    cfg.store_dir = a.store;
    if (a.epochs) cfg.train.epochs = *a.epochs;
    Service svc(cfg);
    std::cout << "model_version " << svc.retrain(a.seed) << "\n";
    return 0;
}

struct ServeArgs {
    std::string config, store, host, model, data;
    std::optional<int> port;
    std::optional<std::uint64_t> seed;
};

int run_serve(const ServeArgs& a)
{
    AppConfig cfg = base_config(a.config);
    if (!a.store.empty()) cfg.store_dir = a.store;
    if (!a.host.empty()) cfg.host = a.host;
    if (a.port) cfg.port = *a.port;
    if (!a.model.empty()) cfg.model_path = a.model;
    if (!a.data.empty()) cfg.dataset_path = a.data;
    if (a.seed) cfg.retrain_seed = *a.seed;
    Service svc(cfg);
    httplib::Server server;
    install_routes(server, svc);
    g_server = &server;
    std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
    std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });

    int port = cfg.port;
    if (port == 0) {
        port = server.bind_to_any_port(cfg.host);
    } else if (!server.bind_to_port(cfg.host, port)) {
        throw IoError("cannot bind " + cfg.host + ":" + std::to_string(port));
    }
    std::cout << "listening on http://" << cfg.host << ":" << port << " (store " << cfg.store_dir << ", model v"
              << svc.model_version() << ")" << std::endl;
    server.listen_after_bind();
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Interior color consultation: data, training, recommendations and wall renders"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate-data", "Write a synthetic labelled dataset");
    g->add_option("--n", gen.n, "Number of records")->check(CLI::PositiveNumber);
    g->add_option("--seed", gen.seed, "RNG seed");
    g->add_option("--noise", gen.noise, "Label noise fraction in [0,1)");
    g->add_option("--out", gen.out, "Output dataset file")->required();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a model on a dataset file (80/20 split)");
    t->add_option("--data", tr.data, "Dataset file")->required();
    t->add_option("--out", tr.out, "Output model file")->required();
    t->add_option("--history", tr.history, "History/metadata file (default: <out>.history.json)");
    t->add_option("--epochs", tr.epochs, "Epochs");
    t->add_option("--lr", tr.lr, "Adam learning rate");
    t->add_option("--fallback-lr", tr.fallback_lr, "Learning rate used if the first run diverges");
    t->add_option("--dropout", tr.dropout, "Dropout rate");
    t->add_option("--batch", tr.batch, "Mini-batch size");
    t->add_option("--split", tr.split, "Training fraction");
    t->add_option("--seed", tr.seed, "Seed for init, split, shuffling and dropout");
    t->add_flag("--quiet", tr.quiet, "Suppress per-epoch output");

    ConsultArgs co;
    auto* c = app.add_subcommand("consult", "Recommend three wall colors for a room photo");
    c->add_option("--image", co.image, "Room image (PNG or JPEG)")->required();
    auto* det = c->add_option("--detections", co.detections, "Detections document");
    auto* url = c->add_option("--detector-url", co.detector_url, "Detector service endpoint");
    det->excludes(url);
    c->add_option("--attrs", co.attrs, "Attribute document")->required();
    c->add_option("--model", co.model, "Model file, installed if the store has none");
    c->add_option("--store", co.store, "Store directory (default: <out>/store)");
    c->add_option("--out", co.out, "Output directory")->required();
    c->add_option("--config", co.config, "Config file");
    c->add_option("--seed", co.seed, "Clustering seed");
    c->add_option("--min-confidence", co.min_confidence, "Detection confidence threshold");

    VisualizeArgs vi;
    auto* v = app.add_subcommand("visualize", "Render wall recolors for chosen families");
    v->add_option("--image", vi.image, "Room image (PNG or JPEG)")->required();
    v->add_option("--detections", vi.detections, "Detections document");
    v->add_option("--family", vi.families, "Family name or id (repeatable; default all)");
    v->add_option("--out", vi.out, "Output directory")->required();
    v->add_option("--config", vi.config, "Config file");
    v->add_option("--seed", vi.seed, "Accepted for symmetry; rendering is deterministic");
    v->add_option("--min-confidence", vi.min_confidence, "Detection confidence threshold");

    FeedbackArgs fb;
    auto* f = app.add_subcommand("feedback", "Accept or reject a consultation's recommendations");
    f->add_option("--store", fb.store, "Store directory")->required();
    f->add_option("--id", fb.id, "Consultation id")->required();
    auto* acc = f->add_option("--accept", fb.accept, "Accepted family (name or id)");
    auto* rej = f->add_flag("--reject", fb.reject, "Reject all three");
    acc->excludes(rej);
    f->add_option("--config", fb.config, "Config file");
    f->add_option("--seed", fb.seed, "Accepted for symmetry");

    RetrainArgs re;
    auto* r = app.add_subcommand("retrain", "Retrain on the store's dataset and install the result");
    r->add_option("--store", re.store, "Store directory")->required();
    r->add_option("--seed", re.seed, "Training seed");
    r->add_option("--epochs", re.epochs, "Override configured epochs");
    r->add_option("--config", re.config, "Config file");

    ServeArgs sv;
    auto* s = app.add_subcommand("serve", "Run the HTTP service");
    s->add_option("--config", sv.config, "Config file");
    s->add_option("--store", sv.store, "Store directory");
    s->add_option("--host", sv.host, "Bind address");
    s->add_option("--port", sv.port, "Port (0 picks a free one)");
    s->add_option("--model", sv.model, "Model file, installed if the store has none");
    s->add_option("--data", sv.data, "Dataset imported if the store has none");
    s->add_option("--seed", sv.seed, "Default retrain seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*g) return run_generate(gen);
        if (*t) return run_train(tr);
        if (*c) {
            if (co.detections.empty() == co.detector_url.empty()) {
                throw ValidationError("consult needs exactly one of --detections or --detector-url");
            }
            return run_consult(co);
        }
        if (*v) return run_visualize(vi);
        if (*f) {
            if (fb.accept.empty() && !fb.reject) throw ValidationError("feedback needs --accept or --reject");
            return run_feedback(fb);
        }
        if (*r) return run_retrain(re);
        if (*s) return run_serve(sv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << error_kind(e) << ": " << e.what() << "\n";
        return 1;
    }
    return 2;
}
