#include "impact/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace impact {

namespace {
using json = nlohmann::json;

const std::pair<Ablation, const char*> kAblations[] = {
    {Ablation::None, "none"},
    {Ablation::NoFlip, "no_flip"},
    {Ablation::KeepConUnflipped, "keep_con_unflipped"},
    {Ablation::NoUnseenHead, "no_unseen_head"},
    {Ablation::NoFeatureScore, "no_feature_score"},
    {Ablation::RandomRef, "random_ref"},
    {Ablation::RandomFlip, "random_flip"},
    {Ablation::RandomPerturb, "random_perturb"},
};

void check_params_finite(const ModelState& m) {
    for (double p : m.params)
        if (!std::isfinite(p))
            throw std::runtime_error(
                "training diverged (non-finite parameter); lower the learning rate");
}

LossConfig make_loss(const TrainConfig& cfg) {
    LossConfig loss;
    loss.margin = cfg.margin;
    loss.channels = cfg.arch.channels;
    loss.prior = prior_stats(cfg.arch.channels, 5000, 1.0, cfg.prior_seed);
    loss.signed_dev = cfg.signed_dev;
    return loss;
}

std::vector<FeatureSample> feature_samples(const ModelState& m,
                                           const std::vector<SeriesWindow>& windows) {
    std::vector<FeatureSample> out;
    out.reserve(windows.size());
    for (const auto& w : windows)
        out.push_back({extract_features(m, w), w.label, w.id});
    return out;
}

}  // namespace

std::string ablation_name(Ablation a) {
    for (const auto& [abl, name] : kAblations)
        if (abl == a) return name;
    return "none";
}

Ablation ablation_from_name(const std::string& name) {
    for (const auto& [abl, nm] : kAblations)
        if (name == nm) return abl;
    std::string known;
    for (const auto& [abl, nm] : kAblations) known += std::string(nm) + " ";
    throw std::invalid_argument("unknown ablation '" + name + "'; known: " + known);
}

void TrainConfig::validate() const {
    arch.validate();
    if (epochs_initial < 0 || epochs_total < epochs_initial)
        throw std::invalid_argument("need 0 <= epochs_initial <= epochs_total");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
    if (lambda_unseen < 0.0) throw std::invalid_argument("lambda_unseen must be nonnegative");
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
    if (margin <= 0.0) throw std::invalid_argument("margin must be positive");
}

ModelState train_initial(const OpenSetSplit& split, const TrainConfig& cfg,
                         const LossConfig& loss) {
    cfg.validate();
    ModelState m = init_model(cfg.arch, cfg.seed);
    const int ext = cfg.arch.extractor_params();
    const int hp = cfg.arch.head_params();

    std::vector<const SeriesWindow*> normals, anomalies;
    for (const auto& z : split.d_n) normals.push_back(&z);
    for (const auto& z : split.d_a) anomalies.push_back(&z);
    if (normals.empty() && anomalies.empty())
        throw std::invalid_argument("empty training pool");

    const bool balanced = cfg.balanced_batches && !normals.empty() && !anomalies.empty();
    std::mt19937_64 rng(cfg.seed ^ 0x2545f4914f6cdd1dULL);
    std::vector<double> g(static_cast<size_t>(ext) + hp);
    size_t da_cursor = 0;
    auto next_anomaly = [&]() -> const SeriesWindow* {
        if (da_cursor == anomalies.size()) {
            std::shuffle(anomalies.begin(), anomalies.end(), rng);
            da_cursor = 0;
        }
        return anomalies[da_cursor++];
    };
    for (int epoch = 0; epoch < cfg.epochs_initial; ++epoch) {
        std::vector<const SeriesWindow*> pool = normals;
        if (!balanced) pool.insert(pool.end(), anomalies.begin(), anomalies.end());
        std::shuffle(pool.begin(), pool.end(), rng);
        const size_t chunk = balanced ? std::max<size_t>(1, cfg.batch_size / 2)
                                      : static_cast<size_t>(cfg.batch_size);
        for (size_t start = 0; start < pool.size(); start += chunk) {
            const size_t end = std::min(pool.size(), start + chunk);
            std::vector<const SeriesWindow*> batch(pool.begin() + start, pool.begin() + end);
            if (balanced)
                for (size_t i = 0, n = end - start; i < n; ++i) batch.push_back(next_anomaly());
            std::fill(g.begin(), g.end(), 0.0);
            auto phi = m.phi_params();
            auto head = m.head_params(Head::Seen);
            for (const auto* z : batch)
                loss_grad_t<double>(cfg.arch, phi, head, *z, z->label, loss, g.data(),
                                    g.data() + ext);
            const double scale = cfg.lr / static_cast<double>(batch.size());
            for (int i = 0; i < ext + hp; ++i) m.params[i] -= scale * g[i];
            check_params_finite(m);
        }
    }
    return m;
}

TrainedModel impact_train(const OpenSetSplit& split, const TrainConfig& cfg) {
    cfg.validate();
    if (split.validation.empty())
        throw std::invalid_argument("training needs a non-empty validation set");
    const LossConfig loss = make_loss(cfg);
    const Arch& arch = cfg.arch;
    const int ext = arch.extractor_params();
    const int hp = arch.head_params();
    const int total = arch.total_params();

    TrainedModel tm;
    tm.config = cfg;
    tm.loss = loss;
    tm.model = train_initial(split, cfg, loss);
    ModelState& m = tm.model;
    if (cfg.warm_start_unseen) {
        // Warm-start the auxiliary head from the trained seen head so its
        // outputs begin on the same scale; retraining then specializes it
        // on the perturbed pseudo anomalies.
        auto seen0 = m.head_params(Head::Seen);
        const int off = m.head_offset(Head::Unseen);
        for (int i = 0; i < hp; ++i) m.params[off + i] = seen0[i];
    }
    TrainAudit& audit = tm.audit;

    // Working copy of the unlabeled-normal pool; labels mutate on flips.
    std::vector<SeriesWindow> d_n = split.d_n;
    std::unordered_map<int64_t, size_t> dn_index;
    for (size_t i = 0; i < d_n.size(); ++i) dn_index[d_n[i].id] = i;
    std::unordered_set<int64_t> flipped, dropped, ref_ids;

    std::mt19937_64 rng(cfg.seed ^ 0x94d049bb133111ebULL);
    const int n_total = static_cast<int>(split.d_n.size() + split.d_a.size());
    const int retrain_epochs = cfg.epochs_total - cfg.epochs_initial;
    const bool use_unseen = cfg.ablation != Ablation::NoUnseenHead;

    // Detection-time influence snapshot: scores under the warmed-up model,
    // before any label surgery. Partitions are overwritten at the end with
    // the decisions actually taken during retraining.
    std::unordered_map<int64_t, double> detect_influence;
    {
        auto stest0 = compute_stest(m, split.validation, split.validation, loss, cfg.influence);
        audit.last_report.stest_residual = stest0.residual;
        audit.last_report.cg_converged = stest0.converged;
        audit.last_report.damping = cfg.influence.damping;
        audit.last_report.validation_size = static_cast<int>(split.validation.size());
        for (const auto& z : split.d_n)
            detect_influence[z.id] = influence_score(m, z, loss, stest0);
        for (const auto& z : split.d_a)
            detect_influence[z.id] = influence_score(m, z, loss, stest0);
    }

    std::vector<double> g_seen(static_cast<size_t>(ext) + hp);
    std::vector<double> g_unseen(static_cast<size_t>(total));

    for (int epoch = 0; epoch < retrain_epochs; ++epoch) {
        double flip_influence_sum = 0.0;
        int flip_count = 0;
        double perturb_norm_sum = 0.0;
        int perturb_count = 0;

        STest stest;
        STest stest_head;
        std::vector<FeatureSample> val_feats;
        auto refresh = [&]() {
            stest = compute_stest(m, split.validation, split.validation, loss, cfg.influence);
            if (use_unseen) {
                val_feats = feature_samples(m, split.validation);
                stest_head = compute_stest_head(m, val_feats, val_feats, loss, cfg.influence);
            }
            audit.final_stest_residual = stest.residual;
            audit.cg_converged = stest.converged;
        };
        if (!cfg.refresh_per_batch) refresh();

        std::vector<size_t> dn_order(d_n.size());
        std::iota(dn_order.begin(), dn_order.end(), 0);
        std::shuffle(dn_order.begin(), dn_order.end(), rng);
        std::vector<size_t> da_order(split.d_a.size());
        std::iota(da_order.begin(), da_order.end(), 0);
        std::shuffle(da_order.begin(), da_order.end(), rng);

        const bool balanced = cfg.balanced_batches && !d_n.empty() && !split.d_a.empty();
        const size_t dn_chunk = balanced ? std::max<size_t>(1, cfg.batch_size / 2)
                                         : static_cast<size_t>(cfg.batch_size);
        const size_t n_batches = balanced
                                     ? (d_n.size() + dn_chunk - 1) / dn_chunk
                                     : (d_n.size() + split.d_a.size() + cfg.batch_size - 1) /
                                           cfg.batch_size;
        size_t dn_pos = 0, da_pos = 0;
        auto next_da = [&]() -> const SeriesWindow* {
            if (da_pos == da_order.size()) {
                std::shuffle(da_order.begin(), da_order.end(), rng);
                da_pos = 0;
            }
            return &split.d_a[da_order[da_pos++]];
        };
        for (size_t b = 0; b < n_batches; ++b) {
            if (cfg.refresh_per_batch) refresh();
            const size_t dn_take =
                balanced ? std::min(d_n.size() - dn_pos, dn_chunk)
                         : std::min(d_n.size() - dn_pos,
                                    (d_n.size() + n_batches - 1 - b) / n_batches);

            struct Scored {
                SeriesWindow* z;
                double infl;
            };
            std::vector<Scored> batch_dn;
            for (size_t i = 0; i < dn_take; ++i, ++dn_pos) {
                SeriesWindow& z = d_n[dn_order[dn_pos]];
                if (dropped.count(z.id)) continue;
                batch_dn.push_back({&z, influence_score(m, z, loss, stest)});
            }
            std::vector<const SeriesWindow*> batch_da;
            if (balanced) {
                // Labeled anomalies are oversampled to match the normal half.
                for (size_t i = 0; i < batch_dn.size(); ++i) batch_da.push_back(next_da());
            } else {
                const size_t da_take = std::min(
                    split.d_a.size() - da_pos,
                    (split.d_a.size() + n_batches - 1 - b) / n_batches);
                for (size_t i = 0; i < da_take; ++i, ++da_pos)
                    batch_da.push_back(&split.d_a[da_order[da_pos]]);
            }

            // Identify harmful label-0 members and decide their fate.
            std::vector<Scored*> positives, negatives, zeros;
            for (auto& s : batch_dn) {
                if (s.z->label != 0) continue;  // already flipped earlier
                if (s.infl > 0.0)
                    positives.push_back(&s);
                else if (s.infl < 0.0)
                    negatives.push_back(&s);
                else
                    zeros.push_back(&s);
            }
            switch (cfg.ablation) {
                case Ablation::KeepConUnflipped:
                    break;  // identified but left as-is
                case Ablation::NoFlip:
                    for (auto* s : positives) {
                        dropped.insert(s->z->id);
                        audit.dropped_ids.push_back(s->z->id);
                    }
                    break;
                case Ablation::RandomFlip: {
                    std::vector<Scored*> label0;
                    for (auto& s : batch_dn)
                        if (s.z->label == 0) label0.push_back(&s);
                    std::shuffle(label0.begin(), label0.end(), rng);
                    const size_t n_flip = std::min(positives.size(), label0.size());
                    for (size_t i = 0; i < n_flip; ++i) {
                        label0[i]->z->label = 1;
                        flipped.insert(label0[i]->z->id);
                        audit.flipped_ids.push_back(label0[i]->z->id);
                        flip_influence_sum += label0[i]->infl;
                        ++flip_count;
                    }
                    break;
                }
                default:
                    for (auto* s : positives) {
                        s->z->label = 1;
                        flipped.insert(s->z->id);
                        audit.flipped_ids.push_back(s->z->id);
                        flip_influence_sum += s->infl;
                        ++flip_count;
                    }
                    break;
            }

            // Reference samples: most helpful (most negative influence);
            // perturbation candidates: least helpful among the rest.
            auto by_influence_then_id = [](const Scored* a, const Scored* b) {
                if (a->infl != b->infl) return a->infl < b->infl;
                return a->z->id < b->z->id;
            };
            std::vector<Scored*> helpers;
            for (auto* s : negatives)
                if (s->z->label == 0) helpers.push_back(s);
            std::sort(helpers.begin(), helpers.end(), by_influence_then_id);
            if (cfg.ablation == Ablation::RandomRef)
                std::shuffle(helpers.begin(), helpers.end(), rng);
            const size_t n_ref = std::min<size_t>(cfg.k, helpers.size());
            for (size_t i = 0; i < n_ref; ++i) {
                if (ref_ids.insert(helpers[i]->z->id).second)
                    audit.reference_ids.push_back(helpers[i]->z->id);
            }
            const size_t n_per =
                std::min<size_t>(cfg.k, helpers.size() > n_ref ? helpers.size() - n_ref : 0);
            std::vector<Scored*> per_candidates(helpers.end() - n_per, helpers.end());
            std::vector<Scored*> d_h(helpers.begin(), helpers.end() - n_per);

            // Pseudo unseen anomalies from the perturbation candidates.
            std::vector<PerturbedFeature> w_per;
            if (use_unseen && cfg.alpha > 0.0 && !stest_head.v.empty()) {
                for (auto* s : per_candidates) {
                    FeatureSample fs{extract_features(m, *s->z), 0, s->z->id};
                    PerturbedFeature pf;
                    pf.source_id = fs.id;
                    pf.alpha = cfg.alpha;
                    pf.values = fs.values;
                    if (cfg.ablation == Ablation::RandomPerturb) {
                        // Same relative step size as the influence-guided
                        // perturbation, but in a uniformly random direction.
                        std::normal_distribution<double> nd(0.0, 1.0);
                        std::vector<double> dir(fs.values.size());
                        double nrm = 0.0, phi_norm = 0.0;
                        for (auto& v : dir) {
                            v = nd(rng);
                            nrm += v * v;
                        }
                        for (double v : fs.values) phi_norm += v * v;
                        nrm = std::sqrt(std::max(nrm, 1e-20));
                        phi_norm = std::sqrt(std::max(phi_norm, 1e-12));
                        for (size_t j = 0; j < dir.size(); ++j)
                            pf.values[j] += cfg.alpha * phi_norm * dir[j] / nrm;
                        pf.direction_norm_sq = 1.0;
                    } else {
                        auto dir = perturb_direction(m, fs, stest_head, loss, Head::Seen);
                        if (dir.degenerate) continue;
                        // Trust region: alpha is a step relative to the
                        // feature norm, so the pseudo anomaly stays near the
                        // data manifold regardless of the s_test scale.
                        double phi_norm = 0.0;
                        for (double v : fs.values) phi_norm += v * v;
                        phi_norm = std::sqrt(std::max(phi_norm, 1e-12));
                        const double scale =
                            cfg.alpha * phi_norm / std::sqrt(dir.norm_sq);
                        for (size_t j = 0; j < pf.values.size(); ++j)
                            pf.values[j] += scale * dir.direction[j];
                        pf.direction_norm_sq = dir.norm_sq;
                    }
                    w_per.push_back(std::move(pf));
                    perturb_norm_sum += w_per.back().direction_norm_sq;
                    ++perturb_count;
                    ++audit.perturbed_count;
                }
            }

            // Assemble the update: seen risk over anomalies, references,
            // flipped and clean members; auxiliary risk over the remaining
            // helpful samples and the perturbed features.
            std::fill(g_seen.begin(), g_seen.end(), 0.0);
            std::fill(g_unseen.begin(), g_unseen.end(), 0.0);
            int ns = 0, nu = 0;
            auto phi = m.phi_params();
            auto seen_head = m.head_params(Head::Seen);
            auto unseen_head = m.head_params(Head::Unseen);

            std::unordered_set<const SeriesWindow*> in_dh, in_per;
            if (use_unseen) {
                for (auto* s : d_h) in_dh.insert(s->z);
                // Perturbation candidates leave the seen risk; their
                // perturbed features stand in for them.
                for (auto* s : per_candidates) in_per.insert(s->z);
            }

            for (const auto& s : batch_dn) {
                if (in_dh.count(s.z) || in_per.count(s.z)) continue;
                loss_grad_t<double>(arch, phi, seen_head, *s.z, s.z->label, loss,
                                    g_seen.data(), g_seen.data() + ext);
                ++ns;
            }
            for (const auto* z : batch_da) {
                loss_grad_t<double>(arch, phi, seen_head, *z, z->label, loss, g_seen.data(),
                                    g_seen.data() + ext);
                ++ns;
            }
            for (auto* s : d_h) {
                if (!in_dh.count(s->z)) continue;
                loss_grad_t<double>(arch, phi, seen_head, *s->z, s->z->label, loss,
                                    g_unseen.data(), g_unseen.data() + ext);
                ++nu;
                if (cfg.unseen_both_heads) {
                    loss_grad_t<double>(arch, phi, unseen_head, *s->z, s->z->label, loss,
                                        g_unseen.data(), g_unseen.data() + ext + hp);
                    ++nu;
                }
            }
            for (const auto& pf : w_per) {
                head_loss_grad_t<double>(arch, unseen_head, pf.values, pf.label, loss,
                                         g_unseen.data() + ext + hp);
                ++nu;
            }

            const double ws = ns > 0 ? cfg.lr / ns : 0.0;
            const double wu = nu > 0 ? cfg.lr * cfg.lambda_unseen / nu : 0.0;
            for (int i = 0; i < ext + hp; ++i)
                m.params[i] -= ws * g_seen[i] + wu * g_unseen[i];
            for (int i = ext + hp; i < total; ++i) m.params[i] -= wu * g_unseen[i];
            check_params_finite(m);
        }

        if (flip_count > 0)
            audit.predicted_flip_delta =
                -2.0 * flip_influence_sum / (static_cast<double>(n_total) * flip_count);
        if (perturb_count > 0)
            audit.predicted_perturb_delta = -cfg.alpha * perturb_norm_sum /
                                            (static_cast<double>(n_total) * perturb_count);
        audit.epoch_val_risk.push_back(risk(m, split.validation, loss));
    }

    // Final audit report: detection-time influences paired with the
    // decisions actually taken across the retraining epochs.
    for (const auto& z0 : split.d_n) {
        InfluenceEntry e;
        e.id = z0.id;
        e.provenance = z0.provenance;
        e.influence = detect_influence.at(z0.id);
        if (flipped.count(z0.id) || dropped.count(z0.id))
            e.partition = PartitionTag::Contaminated;
        else if (ref_ids.count(z0.id))
            e.partition = PartitionTag::Reference;
        else
            e.partition = e.influence > 0.0 ? PartitionTag::Contaminated : PartitionTag::Clean;
        audit.last_report.entries.push_back(e);
    }
    for (const auto& z : split.d_a) {
        InfluenceEntry e;
        e.id = z.id;
        e.provenance = z.provenance;
        e.influence = detect_influence.at(z.id);
        e.partition = PartitionTag::LabeledAnomaly;
        audit.last_report.entries.push_back(e);
    }

    // Reference feature mean for the feature-distance score.
    {
        std::vector<std::vector<double>> feats;
        for (const auto& z : d_n)
            if (ref_ids.count(z.id)) feats.push_back(extract_features(m, z));
        if (feats.empty()) {
            audit.reference_fallback = true;
            for (const auto& z : split.validation)
                if (z.label == 0) feats.push_back(extract_features(m, z));
        }
        if (feats.empty()) throw std::runtime_error("no reference or validation-normal features");
        tm.ref_feature_mean.assign(arch.feature_dim, 0.0);
        for (const auto& f : feats)
            for (int j = 0; j < arch.feature_dim; ++j) tm.ref_feature_mean[j] += f[j];
        for (auto& v : tm.ref_feature_mean) v /= static_cast<double>(feats.size());
    }

    if (cfg.zscore_combine) {
        std::vector<double> sm, sf;
        for (const auto& z : split.validation) {
            auto sc = score_sample(tm, z);
            sm.push_back(sc.s_m);
            sf.push_back(sc.s_f);
        }
        auto stats = [](const std::vector<double>& v) {
            double mu = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
            double var = 0.0;
            for (double x : v) var += (x - mu) * (x - mu);
            var = v.size() > 1 ? var / (v.size() - 1) : 0.0;
            return std::pair(mu, std::max(std::sqrt(var), 1e-9));
        };
        std::tie(tm.score_stats.mean_sm, tm.score_stats.sd_sm) = stats(sm);
        std::tie(tm.score_stats.mean_sf, tm.score_stats.sd_sf) = stats(sf);
    }
    return tm;
}

SampleScore score_sample(const TrainedModel& tm, const SeriesWindow& x) {
    const auto& cfg = tm.config;
    auto feat = extract_features(tm.model, x);
    auto h_s = head_scores(tm.model, feat, Head::Seen);
    std::vector<double> h_u(h_s.size(), 0.0);
    if (cfg.ablation != Ablation::NoUnseenHead)
        h_u = head_scores(tm.model, feat, Head::Unseen);

    SampleScore out;
    out.s_m = -std::numeric_limits<double>::infinity();
    for (size_t q = 0; q < h_s.size(); ++q)
        out.s_m = std::max(out.s_m, h_s[q] + h_u[q]);
    if (cfg.ablation != Ablation::NoFeatureScore) {
        double d2 = 0.0;
        for (size_t j = 0; j < feat.size(); ++j) {
            const double d = feat[j] - tm.ref_feature_mean[j];
            d2 += d * d;
        }
        out.s_f = d2;
    }
    if (cfg.zscore_combine) {
        double s = (out.s_m - tm.score_stats.mean_sm) / tm.score_stats.sd_sm;
        if (cfg.ablation != Ablation::NoFeatureScore)
            s += (out.s_f - tm.score_stats.mean_sf) / tm.score_stats.sd_sf;
        out.s = s;
    } else {
        out.s = out.s_m + out.s_f;
    }
    return out;
}

std::vector<double> score_windows(const TrainedModel& tm,
                                  const std::vector<SeriesWindow>& windows) {
    std::vector<double> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(score_sample(tm, w).s);
    return out;
}

std::vector<double> point_scores(const TrainedModel& tm,
                                 const std::vector<std::vector<double>>& series) {
    const int D = tm.model.arch.input_dims;
    const int L = tm.model.arch.window_len;
    if (static_cast<int>(series.size()) != D)
        throw std::invalid_argument("series dimension count does not match the model");
    const size_t T = series.front().size();
    for (const auto& dim : series)
        if (dim.size() != T) throw std::invalid_argument("ragged series");
    if (static_cast<int>(T) < L)
        throw std::invalid_argument("series shorter than one window");

    std::vector<double> out(T);
    SeriesWindow w;
    w.dims = D;
    w.length = L;
    w.values.resize(static_cast<size_t>(D) * L);
    for (size_t end = L - 1; end < T; ++end) {
        for (int d = 0; d < D; ++d)
            for (int t = 0; t < L; ++t) w.at(d, t) = series[d][end + 1 - L + t];
        out[end] = score_sample(tm, w).s;
    }
    for (int t = 0; t < L - 1; ++t) out[t] = out[L - 1];
    return out;
}

namespace {

json config_to_json(const TrainConfig& c) {
    json j;
    j["arch"] = {{"input_dims", c.arch.input_dims},
                 {"window_len", c.arch.window_len},
                 {"hidden_width", c.arch.hidden_width},
                 {"feature_dim", c.arch.feature_dim},
                 {"head_hidden", c.arch.head_hidden},
                 {"channels", c.arch.channels},
                 {"dilations", c.arch.dilations}};
    j["epochs_total"] = c.epochs_total;
    j["epochs_initial"] = c.epochs_initial;
    j["batch_size"] = c.batch_size;
    j["lr"] = c.lr;
    j["lambda_unseen"] = c.lambda_unseen;
    j["k"] = c.k;
    j["alpha"] = c.alpha;
    j["margin"] = c.margin;
    j["influence"] = {{"damping", c.influence.damping},
                      {"cg_tol", c.influence.cg_tol},
                      {"cg_max_iter", c.influence.cg_max_iter},
                      {"hessian_sample_cap", c.influence.hessian_sample_cap}};
    j["seed"] = c.seed;
    j["prior_seed"] = c.prior_seed;
    j["ablation"] = ablation_name(c.ablation);
    j["signed_dev"] = c.signed_dev;
    j["zscore_combine"] = c.zscore_combine;
    j["refresh_per_batch"] = c.refresh_per_batch;
    j["unseen_both_heads"] = c.unseen_both_heads;
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    const auto& a = j.at("arch");
    c.arch.input_dims = a.at("input_dims");
    c.arch.window_len = a.at("window_len");
    c.arch.hidden_width = a.at("hidden_width");
    c.arch.feature_dim = a.at("feature_dim");
    c.arch.head_hidden = a.at("head_hidden");
    c.arch.channels = a.at("channels");
    c.arch.dilations = a.at("dilations").get<std::vector<int>>();
    c.epochs_total = j.at("epochs_total");
    c.epochs_initial = j.at("epochs_initial");
    c.batch_size = j.at("batch_size");
    c.lr = j.at("lr");
    c.lambda_unseen = j.at("lambda_unseen");
    c.k = j.at("k");
    c.alpha = j.at("alpha");
    c.margin = j.at("margin");
    c.influence.damping = j.at("influence").at("damping");
    c.influence.cg_tol = j.at("influence").at("cg_tol");
    c.influence.cg_max_iter = j.at("influence").at("cg_max_iter");
    c.influence.hessian_sample_cap = j.at("influence").at("hessian_sample_cap");
    c.seed = j.at("seed");
    c.prior_seed = j.at("prior_seed");
    c.ablation = ablation_from_name(j.at("ablation"));
    c.signed_dev = j.at("signed_dev");
    c.zscore_combine = j.at("zscore_combine");
    c.refresh_per_batch = j.at("refresh_per_batch");
    c.unseen_both_heads = j.at("unseen_both_heads");
    return c;
}

}  // namespace

void save_trained(const TrainedModel& tm, const std::string& path) {
    json j;
    j["format"] = "impact-model-v1";
    j["config"] = config_to_json(tm.config);
    j["params"] = tm.model.params;
    j["seed"] = tm.model.seed;
    j["loss"] = {{"margin", tm.loss.margin},
                 {"channels", tm.loss.channels},
                 {"signed_dev", tm.loss.signed_dev},
                 {"prior",
                  {{"mu", tm.loss.prior.mu},
                   {"sigma", tm.loss.prior.sigma},
                   {"sample_count", tm.loss.prior.sample_count},
                   {"source_sigma", tm.loss.prior.source_sigma}}}};
    j["ref_feature_mean"] = tm.ref_feature_mean;
    j["score_stats"] = {{"mean_sm", tm.score_stats.mean_sm},
                        {"sd_sm", tm.score_stats.sd_sm},
                        {"mean_sf", tm.score_stats.mean_sf},
                        {"sd_sf", tm.score_stats.sd_sf}};
    j["audit"] = {{"flipped_ids", tm.audit.flipped_ids},
                  {"dropped_ids", tm.audit.dropped_ids},
                  {"reference_ids", tm.audit.reference_ids},
                  {"perturbed_count", tm.audit.perturbed_count},
                  {"predicted_flip_delta", tm.audit.predicted_flip_delta},
                  {"predicted_perturb_delta", tm.audit.predicted_perturb_delta},
                  {"final_stest_residual", tm.audit.final_stest_residual},
                  {"cg_converged", tm.audit.cg_converged},
                  {"reference_fallback", tm.audit.reference_fallback},
                  {"epoch_val_risk", tm.audit.epoch_val_risk}};
    {
        json entries = json::array();
        for (const auto& e : tm.audit.last_report.entries)
            entries.push_back({{"id", e.id},
                               {"influence", e.influence},
                               {"partition", partition_name(e.partition)},
                               {"provenance", e.provenance == Provenance::InjectedContaminant
                                                  ? "injected_contaminant"
                                                  : "original"}});
        j["audit"]["last_report"] = {
            {"entries", std::move(entries)},
            {"stest_residual", tm.audit.last_report.stest_residual},
            {"cg_converged", tm.audit.last_report.cg_converged},
            {"damping", tm.audit.last_report.damping},
            {"validation_size", tm.audit.last_report.validation_size},
            {"reference_shortfall", tm.audit.last_report.reference_shortfall}};
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump();
}

TrainedModel load_trained(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j = json::parse(in);
    if (j.value("format", "") != std::string("impact-model-v1"))
        throw std::runtime_error(path + ": not an impact-model-v1 file");
    TrainedModel tm;
    tm.config = config_from_json(j.at("config"));
    tm.model.arch = tm.config.arch;
    tm.model.params = j.at("params").get<std::vector<double>>();
    tm.model.seed = j.at("seed");
    if (static_cast<int>(tm.model.params.size()) != tm.model.arch.total_params())
        throw std::runtime_error(path + ": parameter count does not match the architecture");
    const auto& l = j.at("loss");
    tm.loss.margin = l.at("margin");
    tm.loss.channels = l.at("channels");
    tm.loss.signed_dev = l.at("signed_dev");
    tm.loss.prior.mu = l.at("prior").at("mu").get<std::vector<double>>();
    tm.loss.prior.sigma = l.at("prior").at("sigma").get<std::vector<double>>();
    tm.loss.prior.sample_count = l.at("prior").at("sample_count");
    tm.loss.prior.source_sigma = l.at("prior").at("source_sigma");
    tm.ref_feature_mean = j.at("ref_feature_mean").get<std::vector<double>>();
    tm.score_stats.mean_sm = j.at("score_stats").at("mean_sm");
    tm.score_stats.sd_sm = j.at("score_stats").at("sd_sm");
    tm.score_stats.mean_sf = j.at("score_stats").at("mean_sf");
    tm.score_stats.sd_sf = j.at("score_stats").at("sd_sf");
    const auto& au = j.at("audit");
    tm.audit.flipped_ids = au.at("flipped_ids").get<std::vector<int64_t>>();
    tm.audit.dropped_ids = au.at("dropped_ids").get<std::vector<int64_t>>();
    tm.audit.reference_ids = au.at("reference_ids").get<std::vector<int64_t>>();
    tm.audit.perturbed_count = au.at("perturbed_count");
    tm.audit.predicted_flip_delta = au.at("predicted_flip_delta");
    tm.audit.predicted_perturb_delta = au.at("predicted_perturb_delta");
    tm.audit.final_stest_residual = au.at("final_stest_residual");
    tm.audit.cg_converged = au.at("cg_converged");
    tm.audit.reference_fallback = au.at("reference_fallback");
    tm.audit.epoch_val_risk = au.at("epoch_val_risk").get<std::vector<double>>();
    {
        const auto& r = au.at("last_report");
        auto& rep = tm.audit.last_report;
        for (const auto& je : r.at("entries")) {
            InfluenceEntry e;
            e.id = je.at("id").get<int64_t>();
            e.influence = je.at("influence");
            const std::string p = je.at("partition");
            if (p == "contaminated") e.partition = PartitionTag::Contaminated;
            else if (p == "reference") e.partition = PartitionTag::Reference;
            else if (p == "perturb_candidate") e.partition = PartitionTag::PerturbCandidate;
            else if (p == "labeled_anomaly") e.partition = PartitionTag::LabeledAnomaly;
            else e.partition = PartitionTag::Clean;
            e.provenance = je.at("provenance") == std::string("injected_contaminant")
                               ? Provenance::InjectedContaminant
                               : Provenance::Original;
            rep.entries.push_back(e);
        }
        rep.stest_residual = r.at("stest_residual");
        rep.cg_converged = r.at("cg_converged");
        rep.damping = r.at("damping");
        rep.validation_size = r.at("validation_size");
        rep.reference_shortfall = r.at("reference_shortfall");
    }
    return tm;
}

}  // namespace impact
