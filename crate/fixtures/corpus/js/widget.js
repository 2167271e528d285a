window.galleryWidget = { version: 1 };
