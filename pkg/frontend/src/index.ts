export { readArray, writeArray } from './container';
export { loadManifest, loadSample, splitEntries } from './dataset';
export {
  buildNetwork,
  forward,
  paramCount,
  plainConvParamCount,
  res2ParamCount,
  totalParams,
  DEFAULT_SPEC
} from './model';
export { train, evaluateRmse, loadCheckpoint, saveCheckpoint, rmseOf } from './train';
export { inferToCube, unshear, channelOffsets, metaFromCheckpoint } from './infer';
export { initBackend } from './backend';
