// Wire contract of the backend /analyze endpoint. The extension renders
// these responses verbatim and performs no analysis of its own.
export const DEFAULT_BACKEND_URL = "http://127.0.0.1:8200";
