export { decodePng, GrayImage } from "./png";
export {
  CROP,
  DEFAULT_LAYERS,
  FILTER_BANK,
  LayerStats,
  N_CHANNELS,
  Plane,
  blur,
  correlate3x3,
  downsample,
  extractStats,
} from "./features";
export {
  FSTATS_FORMAT_VERSION,
  FstatsHeader,
  decodeFstats,
  encodeFstats,
  imageSha256,
} from "./fstats";
export { exportFeatures } from "./cli";
