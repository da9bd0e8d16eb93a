#include "duet/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <nlohmann/json.hpp>

#include "duet/corpus.hpp"
#include "duet/io.hpp"
#include "duet/report.hpp"
#include "duet/rng.hpp"
#include "duet/selection.hpp"
#include "duet/worker_pool.hpp"

namespace duet {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw IoError("write failure on " + path.string());
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

Classifier load_named_model(const fs::path& models_dir, const std::string& name) {
    const fs::path path = models_dir / (name + ".bin");
    if (!fs::exists(path)) {
        throw IoError("model file " + path.string() +
                      " is missing; train it first (see the train command)");
    }
    return load_model(path.string());
}

std::vector<Classifier> load_named_models(const fs::path& models_dir,
                                          const std::vector<std::string>& names) {
    std::vector<Classifier> models;
    models.reserve(names.size());
    for (const std::string& name : names) models.push_back(load_named_model(models_dir, name));
    return models;
}

/// Enumerates *.png sorted by filename; unreadable files are skipped and
/// reported instead of aborting the run.
std::vector<NamedImage> load_images_tolerant(const fs::path& dir,
                                             std::vector<std::string>& warnings) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            paths.push_back(entry.path());
        }
    }
    std::sort(paths.begin(), paths.end());
    std::vector<NamedImage> out;
    out.reserve(paths.size());
    for (const fs::path& p : paths) {
        try {
            out.push_back({p.stem().string(), load_png(p.string())});
        } catch (const std::exception& e) {
            warnings.push_back("skipping " + p.string() + ": " + e.what());
        }
    }
    return out;
}

json candidate_record(const AdversarialCandidate& cand) {
    json rec;
    rec["ssim"] = cand.ssim_to_original;
    rec["surrogate_fooled"] = cand.surrogate_fooled;
    return rec;
}

struct SectionStats {
    double score = 0.0;
    double average = 0.0;
    double average_successful = 0.0;
    std::size_t successful_count = 0;
    std::vector<double> rates;
};

SectionStats section_stats(const std::vector<CandidateEvaluation>& evals, std::size_t n_targets) {
    SectionStats s;
    if (evals.empty()) {
        s.rates.assign(n_targets, 0.0);
        return s;
    }
    s.score = score(evals, "section").total;
    s.average = average_ssim(evals);
    s.average_successful = average_ssim_successful(evals, &s.successful_count);
    s.rates.reserve(n_targets);
    for (std::size_t t = 0; t < n_targets; ++t) s.rates.push_back(misclassification_rate(evals, t));
    return s;
}

json section_json(const SectionStats& s, const std::vector<std::string>& target_names,
                  std::size_t n_images) {
    json j;
    j["n_images"] = n_images;
    j["score"] = s.score;
    j["average_ssim"] = s.average;
    j["average_ssim_successful"] = s.average_successful;
    j["successful_count"] = s.successful_count;
    json rates;
    for (std::size_t t = 0; t < target_names.size(); ++t) {
        rates[target_names[t]] = t < s.rates.size() ? s.rates[t] : 0.0;
    }
    j["misclassification_rate"] = std::move(rates);
    return j;
}

int finish(const std::vector<std::string>& warnings) {
    for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
    if (!warnings.empty()) {
        std::cerr << warnings.size() << " image(s) skipped or failed\n";
        return 2;
    }
    return 0;
}

} // namespace

int cmd_synth(const RunConfig& cfg) {
    LabeledCorpus corpus =
        synthesize_corpus(cfg.corpus.n_real, cfg.corpus.n_fake, cfg.corpus.size, cfg.seed);
    save_corpus(corpus, cfg.corpus_dir);
    std::cerr << "synth: wrote " << corpus.real.size() << " real and " << corpus.fake.size()
              << " fake images to " << cfg.corpus_dir.string() << '\n';
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.train.detectors.empty()) {
        throw ConfigError("train: no detectors configured; add a train.detectors list");
    }
    LabeledCorpus corpus = load_corpus(cfg.corpus_dir);
    if (corpus.real.empty() || corpus.fake.empty()) {
        throw ConfigError("train: corpus at " + cfg.corpus_dir.string() +
                          " must contain both real/ and fake/ images; run synth first");
    }
    const std::vector<TrainSample> samples = corpus_samples(corpus);
    fs::create_directories(cfg.models_dir);

    json summary;
    for (const DetectorSpec& spec : cfg.train.detectors) {
        TrainHyper hyper;
        hyper.learning_rate = cfg.train.learning_rate;
        hyper.epochs = cfg.train.epochs;
        hyper.batch_size = cfg.train.batch_size;
        hyper.seed = spec.seed;
        TrainResult result = train_detector(samples, spec.arch, hyper);
        const fs::path path = cfg.models_dir / (spec.name + ".bin");
        save_model(result.model, path.string());
        summary[spec.name] = {{"accuracy", result.final_accuracy},
                              {"conv1_channels", spec.arch.conv1_channels},
                              {"conv2_channels", spec.arch.conv2_channels},
                              {"pool", spec.arch.pool},
                              {"seed", spec.seed}};
        std::cerr << "train: " << spec.name << " accuracy " << result.final_accuracy * 100.0
                  << "% -> " << path.string() << '\n';
    }
    write_text_file(cfg.models_dir / "training_summary.json", summary.dump(2) + "\n");
    return 0;
}

int cmd_attack(const RunConfig& cfg) {
    if (cfg.surrogates.empty()) throw ConfigError("attack: no surrogate models configured");
    SurrogateEnsemble ensemble =
        SurrogateEnsemble::uniform(load_named_models(cfg.models_dir, cfg.surrogates));

    std::vector<std::string> warnings;
    std::vector<NamedImage> fakes = load_images_tolerant(cfg.corpus_dir / "fake", warnings);

    const fs::path cand_dir = cfg.output_dir / "candidates";
    fs::create_directories(cand_dir / "mntd_pgd");
    fs::create_directories(cand_dir / "sg_pgd");

    const Rng master(cfg.seed);
    const std::size_t n = fakes.size();
    std::vector<std::string> errors(n);
    parallel_for_indexed(n, cfg.workers, [&](std::size_t i) {
        const NamedImage& item = fakes[i];
        AttackConfig acfg = cfg.attack;
        acfg.seed = master.child(i).seed();
        try {
            DualStreamResult r = run_dual_stream(item.image, ensemble, acfg, cfg.preprocess);
            save_png(r.mntd.image, (cand_dir / "mntd_pgd" / (item.id + ".png")).string());
            save_png(r.sg.image, (cand_dir / "sg_pgd" / (item.id + ".png")).string());

            json meta;
            meta["image_id"] = item.id;
            meta["epsilon"] = r.mntd.epsilon_used;
            if (r.search) {
                json probes = json::array();
                for (const EpsilonProbe& p : r.search->trace) {
                    probes.push_back({{"epsilon", p.epsilon}, {"success", p.success}});
                }
                meta["search"] = {{"succeeded", r.search->succeeded}, {"probes", std::move(probes)}};
            } else {
                meta["search"] = nullptr;
            }
            meta["candidates"] = {{"mntd_pgd", candidate_record(r.mntd)},
                                  {"sg_pgd", candidate_record(r.sg)}};
            write_text_file(cand_dir / (item.id + ".json"), meta.dump(2) + "\n");
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    std::size_t attacked = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (errors[i].empty()) {
            ++attacked;
        } else {
            warnings.push_back("attack failed on " + fakes[i].id + ": " + errors[i]);
        }
    }
    std::cerr << "attack: " << attacked << " of " << n << " images attacked, output in "
              << cand_dir.string() << '\n';
    return finish(warnings);
}

int cmd_select(const RunConfig& cfg) {
    if (cfg.selection_classifiers.empty()) {
        throw ConfigError("select: no selection classifiers configured (set targets)");
    }
    const std::vector<Classifier> classifiers =
        load_named_models(cfg.models_dir, cfg.selection_classifiers);

    std::vector<std::string> warnings;
    std::vector<NamedImage> originals = load_images_tolerant(cfg.corpus_dir / "fake", warnings);
    const fs::path cand_dir = cfg.output_dir / "candidates";
    const fs::path final_dir = cfg.output_dir / "final";
    fs::create_directories(final_dir);

    const std::size_t n = originals.size();
    std::vector<std::optional<SelectionOutcome>> outcomes(n);
    std::vector<std::string> errors(n);
    parallel_for_indexed(n, cfg.workers, [&](std::size_t i) {
        const NamedImage& item = originals[i];
        try {
            AdversarialCandidate cand_m;
            cand_m.stream = Stream::MntdPgd;
            const fs::path mntd_path = cand_dir / "mntd_pgd" / (item.id + ".png");
            cand_m.image = load_png(mntd_path.string());
            AdversarialCandidate cand_s;
            cand_s.stream = Stream::SgPgd;
            const fs::path sg_path = cand_dir / "sg_pgd" / (item.id + ".png");
            cand_s.image = load_png(sg_path.string());

            SelectionOutcome outcome = select_streams(cand_m, cand_s, classifiers, item.image);
            const fs::path winner = outcome.chosen == Stream::MntdPgd ? mntd_path : sg_path;
            fs::copy_file(winner, final_dir / (item.id + ".png"),
                          fs::copy_options::overwrite_existing);
            outcomes[i] = std::move(outcome);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    json images = json::array();
    json error_rows = json::array();
    double total_m = 0.0, total_s = 0.0, total_sel = 0.0;
    std::size_t n_ok = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i].empty()) {
            error_rows.push_back({{"image_id", originals[i].id}, {"error", errors[i]}});
            warnings.push_back("select failed on " + originals[i].id + ": " + errors[i]);
            continue;
        }
        const SelectionOutcome& o = *outcomes[i];
        images.push_back({{"image_id", originals[i].id},
                          {"chosen", stream_name(o.chosen)},
                          {"score", {{"mntd_pgd", o.score_mntd}, {"sg_pgd", o.score_sg}}},
                          {"ssim", {{"mntd_pgd", o.eval_mntd.ssim}, {"sg_pgd", o.eval_sg.ssim}}}});
        total_m += o.score_mntd;
        total_s += o.score_sg;
        total_sel += o.chosen == Stream::MntdPgd ? o.score_mntd : o.score_sg;
        ++n_ok;
    }

    json out;
    out["n_images"] = n_ok;
    out["classifiers"] = cfg.selection_classifiers;
    out["images"] = std::move(images);
    out["totals"] = {{"mntd_pgd", total_m}, {"sg_pgd", total_s}, {"selected", total_sel}};
    out["errors"] = std::move(error_rows);
    write_text_file(cfg.output_dir / "selection.json", out.dump(2) + "\n");

    if (n == 0) std::cerr << "select: no input images found; wrote an empty report\n";
    std::cerr << "select: " << n_ok << " of " << n << " images selected, report at "
              << (cfg.output_dir / "selection.json").string() << '\n';
    return finish(warnings);
}

int cmd_evaluate(const RunConfig& cfg) {
    if (cfg.targets.empty()) throw ConfigError("evaluate: no target models configured");
    const std::vector<Classifier> targets = load_named_models(cfg.models_dir, cfg.targets);

    std::vector<std::string> warnings;
    std::vector<NamedImage> original_list =
        load_images_tolerant(cfg.corpus_dir / "fake", warnings);
    std::map<std::string, const Image*> originals;
    for (const NamedImage& item : original_list) originals[item.id] = &item.image;

    std::map<std::string, std::string> chosen_stream;
    {
        const json sel = read_json_file(cfg.output_dir / "selection.json");
        for (const json& row : sel.at("images")) {
            chosen_stream[row.at("image_id").get<std::string>()] =
                row.at("chosen").get<std::string>();
        }
    }

    const fs::path cand_dir = cfg.output_dir / "candidates";
    std::vector<NamedImage> finals = load_images_tolerant(cfg.output_dir / "final", warnings);

    // Per-image rows for the selected set; indices without errors are kept.
    const std::size_t n = finals.size();
    std::vector<std::optional<ReportRow>> row_slots(n);
    std::vector<std::string> errors(n);
    parallel_for_indexed(n, cfg.workers, [&](std::size_t i) {
        const NamedImage& item = finals[i];
        try {
            auto orig_it = originals.find(item.id);
            if (orig_it == originals.end()) throw IoError("no original for " + item.id);
            auto stream_it = chosen_stream.find(item.id);
            if (stream_it == chosen_stream.end()) {
                throw IoError("no selection record for " + item.id);
            }
            const json meta = read_json_file(cand_dir / (item.id + ".json"));

            ReportRow row;
            row.image_id = item.id;
            row.stream = stream_it->second;
            row.epsilon = meta.at("epsilon").get<double>();
            row.ssim = ssim(*orig_it->second, item.image, 7);
            row.fooled.resize(targets.size());
            for (std::size_t t = 0; t < targets.size(); ++t) {
                row.fooled[t] = predict(targets[t], item.image) == kReal;
            }
            row_slots[i] = std::move(row);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    std::vector<ReportRow> rows;
    json error_rows = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i].empty()) {
            error_rows.push_back({{"image_id", finals[i].id}, {"error", errors[i]}});
            warnings.push_back("evaluate failed on " + finals[i].id + ": " + errors[i]);
        } else {
            rows.push_back(std::move(*row_slots[i]));
        }
    }

    // Selected-set aggregates recompute from the emitted rows: same doubles,
    // summed in row order.
    std::vector<CandidateEvaluation> selected_evals;
    selected_evals.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CandidateEvaluation ev;
        ev.index = i;
        ev.fooled = rows[i].fooled;
        ev.ssim = rows[i].ssim;
        selected_evals.push_back(std::move(ev));
    }
    const SectionStats selected_stats = section_stats(selected_evals, targets.size());

    // Ablation view: each stream's full candidate set evaluated on its own.
    json sections;
    sections["selected"] = section_json(selected_stats, cfg.targets, rows.size());
    for (const char* stream : {"mntd_pgd", "sg_pgd"}) {
        std::vector<Image> cand_images;
        std::vector<Image> cand_originals;
        for (const ReportRow& row : rows) {
            const fs::path path = cand_dir / stream / (row.image_id + ".png");
            try {
                cand_images.push_back(load_png(path.string()));
                cand_originals.push_back(*originals.at(row.image_id));
            } catch (const std::exception& e) {
                warnings.push_back(std::string("ablation: skipping ") + path.string() + ": " +
                                   e.what());
            }
        }
        const std::vector<CandidateEvaluation> evals =
            cand_images.empty() ? std::vector<CandidateEvaluation>{}
                                : evaluate(cand_images, targets, cand_originals);
        sections[stream] = section_json(section_stats(evals, targets.size()), cfg.targets,
                                        cand_images.size());
    }

    fs::create_directories(cfg.output_dir);
    if (cfg.report.csv) {
        write_report_csv((cfg.output_dir / "report.csv").string(), cfg.targets, rows);
    }
    if (cfg.report.json) {
        json summary;
        summary["seed"] = cfg.seed;
        summary["targets"] = cfg.targets;
        summary["n_images"] = rows.size();
        summary["sections"] = std::move(sections);
        summary["errors"] = std::move(error_rows);
        summary["config"] = json::parse(serialize_run_config(cfg));
        write_text_file(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
    }

    std::cerr << "evaluate: " << rows.size() << " of " << n << " images reported, output in "
              << cfg.output_dir.string() << '\n';
    return finish(warnings);
}

} // namespace duet
