#include "sleepstack/bundle.hpp"

#include "sleepstack/errors.hpp"
#include "sleepstack/util.hpp"

#include <json.hpp>

#include <cstring>

namespace sleepstack {

namespace {

nlohmann::json stats_to_json(const ScalerStats& s) {
    return {{"mean", s.mean}, {"std", s.stdev}};
}

ScalerStats stats_from_json(const nlohmann::json& j, std::size_t dim) {
    ScalerStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stdev = j.at("std").get<std::vector<double>>();
    if (s.mean.size() != dim || s.stdev.size() != dim)
        throw Error(ErrorCode::MalformedFile, "scaler stats have the wrong width");
    return s;
}

} // namespace

std::string bundle_to_bytes(const Bundle& bundle) {
    nlohmann::json scaler{{"mode", scaling_mode_name(bundle.scaler.mode)},
                          {"dim", bundle.scaler.dim}};
    if (bundle.scaler.mode == ScalingMode::GlobalZscore) {
        scaler["global"] = stats_to_json(bundle.scaler.global);
    } else {
        nlohmann::json subjects = nlohmann::json::object();
        for (const auto& [subject, stats] : bundle.scaler.per_subject)
            subjects[subject] = stats_to_json(stats);
        scaler["subjects"] = subjects;
    }
    nlohmann::json manifest{{"format_version", 1},
                            {"kind", bundle.kind},
                            {"class_mode", class_mode_name(bundle.mode)},
                            {"feature_map_version", bundle.feature_map_version},
                            {"scaler", scaler}};
    std::string mtext = manifest.dump();

    ByteWriter w;
    w.raw("SSBN", 4);
    w.u16(1);
    w.u32(static_cast<std::uint32_t>(mtext.size()));
    w.raw(mtext.data(), mtext.size());
    w.u16(static_cast<std::uint16_t>(bundle.blobs.size()));
    for (const auto& [name, blob] : bundle.blobs) {
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.raw(name.data(), name.size());
        w.u32(static_cast<std::uint32_t>(blob.size()));
        w.raw(blob.data(), blob.size());
    }
    w.u32(crc32(w.bytes.data(), w.bytes.size()));
    return std::move(w.bytes);
}

Bundle bundle_from_bytes(const std::string& bytes) {
    if (bytes.size() < 16) throw Error(ErrorCode::ChecksumMismatch, "bundle truncated");
    std::string body = bytes.substr(0, bytes.size() - 4);
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[bytes.size() - 4 + static_cast<std::size_t>(i)]))
                  << (8 * i);
    if (stored != crc32(body.data(), body.size()))
        throw Error(ErrorCode::ChecksumMismatch, "bundle checksum mismatch");

    ByteReader r(body);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::memcmp(magic, "SSBN", 4) != 0) throw Error(ErrorCode::BadMagic, "not a model bundle");
    std::uint16_t version = r.u16();
    if (version != 1)
        throw Error(ErrorCode::BadMagic, "unsupported bundle version " + std::to_string(version));

    std::uint32_t mlen = r.u32();
    if (r.remaining() < mlen) throw Error(ErrorCode::ChecksumMismatch, "bundle manifest truncated");
    std::string mtext = body.substr(r.pos, mlen);
    r.pos += mlen;

    Bundle bundle;
    try {
        nlohmann::json manifest = nlohmann::json::parse(mtext);
        bundle.kind = manifest.at("kind").get<std::string>();
        std::string mode = manifest.at("class_mode").get<std::string>();
        if (!parse_class_mode(mode, bundle.mode))
            throw Error(ErrorCode::MalformedFile, "unknown class mode '" + mode + "'");
        bundle.feature_map_version = manifest.at("feature_map_version").get<int>();
        const auto& sj = manifest.at("scaler");
        std::string smode = sj.at("mode").get<std::string>();
        ScalingMode sm;
        if (!parse_scaling_mode(smode, sm))
            throw Error(ErrorCode::MalformedFile, "unknown scaling mode '" + smode + "'");
        bundle.scaler.mode = sm;
        bundle.scaler.dim = sj.at("dim").get<std::size_t>();
        if (sm == ScalingMode::GlobalZscore) {
            bundle.scaler.global = stats_from_json(sj.at("global"), bundle.scaler.dim);
        } else {
            for (const auto& [subject, stats] : sj.at("subjects").items())
                bundle.scaler.per_subject[subject] = stats_from_json(stats, bundle.scaler.dim);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedFile, std::string("bad bundle manifest: ") + e.what());
    }
    if (bundle.feature_map_version != kFeatureMapVersion)
        throw Error(ErrorCode::MalformedFile,
                    "bundle uses feature map v" + std::to_string(bundle.feature_map_version) +
                        ", this build expects v" + std::to_string(kFeatureMapVersion));

    std::uint16_t count = r.u16();
    for (std::uint16_t k = 0; k < count; ++k) {
        std::uint16_t nlen = r.u16();
        if (r.remaining() < nlen) throw Error(ErrorCode::ChecksumMismatch, "bundle entry truncated");
        std::string name = body.substr(r.pos, nlen);
        r.pos += nlen;
        std::uint32_t blen = r.u32();
        if (r.remaining() < blen) throw Error(ErrorCode::ChecksumMismatch, "bundle entry truncated");
        bundle.blobs[name] = body.substr(r.pos, blen);
        r.pos += blen;
    }
    if (!r.eof()) throw Error(ErrorCode::ChecksumMismatch, "trailing bytes in bundle");
    return bundle;
}

void write_bundle(const std::string& path, const Bundle& bundle) {
    write_file(path, bundle_to_bytes(bundle));
}

Bundle read_bundle(const std::string& path) { return bundle_from_bytes(read_file(path)); }

Bundle make_stack_bundle(const StackModel& model, const Scaler& scaler) {
    Bundle b;
    b.kind = "stacking";
    b.mode = model.class_mode;
    b.scaler = scaler;
    for (std::size_t i = 0; i < model.bases.size(); ++i)
        b.blobs[Bundle::kStackNames[i]] = net_to_bytes(model.bases[i]);
    b.blobs["meta"] = net_to_bytes(model.meta);
    return b;
}

StackModel stack_from_bundle(const Bundle& bundle) {
    if (bundle.kind != "stacking")
        throw Error(ErrorCode::BadModel, "bundle holds a " + bundle.kind + " model, not a stack");
    StackModel model;
    model.class_mode = bundle.mode;
    for (int i = 0; i < kStackBases; ++i) {
        auto it = bundle.blobs.find(Bundle::kStackNames[i]);
        if (it == bundle.blobs.end())
            throw Error(ErrorCode::MalformedFile,
                        std::string("bundle is missing entry ") + Bundle::kStackNames[i]);
        model.bases.push_back(net_from_bytes(it->second));
    }
    auto it = bundle.blobs.find("meta");
    if (it == bundle.blobs.end()) throw Error(ErrorCode::MalformedFile, "bundle is missing entry meta");
    model.meta = net_from_bytes(it->second);
    if (model.meta.input_dim() != kStackBases * kClassCount)
        throw Error(ErrorCode::TopologyMismatch, "meta input does not match base outputs");
    return model;
}

Bundle make_dense_bundle(const std::string& kind, const DenseNet& net, const Scaler& scaler,
                         ClassMode mode) {
    Bundle b;
    b.kind = kind;
    b.mode = mode;
    b.scaler = scaler;
    b.blobs["model"] = net_to_bytes(net);
    return b;
}

DenseNet dense_from_bundle(const Bundle& bundle) {
    auto it = bundle.blobs.find("model");
    if (it == bundle.blobs.end()) throw Error(ErrorCode::MalformedFile, "bundle is missing entry model");
    return net_from_bytes(it->second);
}

Bundle make_lstm_bundle(const LstmNet& net, const Scaler& scaler, ClassMode mode) {
    Bundle b;
    b.kind = "lstm";
    b.mode = mode;
    b.scaler = scaler;
    b.blobs["model"] = lstm_to_bytes(net);
    return b;
}

LstmNet lstm_from_bundle(const Bundle& bundle) {
    if (bundle.kind != "lstm")
        throw Error(ErrorCode::BadModel, "bundle holds a " + bundle.kind + " model, not an lstm");
    auto it = bundle.blobs.find("model");
    if (it == bundle.blobs.end()) throw Error(ErrorCode::MalformedFile, "bundle is missing entry model");
    return lstm_from_bytes(it->second);
}

} // namespace sleepstack
