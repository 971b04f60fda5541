// The transformers runtime is an optional dependency loaded dynamically;
// its bundled types do not resolve under NodeNext, so it is typed loosely.
declare module '@xenova/transformers';
