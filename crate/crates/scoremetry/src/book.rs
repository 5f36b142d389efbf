//! Book chapters are embedded as doc-tests once written.
