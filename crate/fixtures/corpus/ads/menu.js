document.querySelectorAll('summary[aria-controls]').forEach(function (s) {
  s.addEventListener('click', function () {
    s.setAttribute('aria-expanded', s.getAttribute('aria-expanded') === 'true' ? 'false' : 'true');
  });
});
