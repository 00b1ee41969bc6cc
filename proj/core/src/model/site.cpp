#include "ciat/model/site.hpp"

namespace ciat::model {

const char* to_string(Side side) { return side == Side::encoder ? "enc" : "dec"; }

const char* to_string(SiteKind kind) {
  switch (kind) {
    case SiteKind::self_attn: return "self_attn";
    case SiteKind::cross_attn: return "cross_attn";
    case SiteKind::ffn: return "ffn";
    case SiteKind::block: return "block";
  }
  return "?";
}

std::string Site::name() const {
  return std::string(to_string(side)) + "." + std::to_string(layer) + "." + to_string(kind);
}

std::vector<Site> enumerate_sites(const ModelConfig& config) {
  std::vector<Site> sites;
  for (std::size_t l = 0; l < config.enc_layers; ++l) {
    sites.push_back({Side::encoder, l, SiteKind::self_attn});
    sites.push_back({Side::encoder, l, SiteKind::ffn});
  }
  for (std::size_t l = 0; l < config.dec_layers; ++l) {
    sites.push_back({Side::decoder, l, SiteKind::self_attn});
    sites.push_back({Side::decoder, l, SiteKind::cross_attn});
    sites.push_back({Side::decoder, l, SiteKind::ffn});
  }
  return sites;
}

}  // namespace ciat::model
